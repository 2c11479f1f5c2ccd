use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::image::{BinaryMask, Image, SegLabel};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Rectangle,
    Triangle,
    Ellipse,
}

/// One filled shape. `center` and `extent` are `(x, y)` in pixel units;
/// `extent` is the half-size (radius for circles, which use `extent.0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    pub class: u8,
    pub color: [f64; 3],
    pub center: (f64, f64),
    pub extent: (f64, f64),
}

impl ShapeSpec {
    /// Whether the point `(px, py)` lies inside the shape (closed boundary).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let (cx, cy) = self.center;
        let (ex, ey) = self.extent;
        let dx = px - cx;
        let dy = py - cy;
        match self.kind {
            ShapeKind::Circle => dx * dx + dy * dy <= ex * ex,
            ShapeKind::Ellipse => (dx / ex).powi(2) + (dy / ey).powi(2) <= 1.0,
            ShapeKind::Rectangle => dx.abs() <= ex && dy.abs() <= ey,
            ShapeKind::Triangle => {
                // Apex at the top, base along the bottom edge of the box.
                let depth = py - (cy - ey);
                depth >= 0.0 && depth <= 2.0 * ey && dx.abs() * 2.0 * ey <= ex * depth
            }
        }
    }

    /// Axis-aligned `(x0, y0, x1, y1)` extent of the shape.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (cx, cy) = self.center;
        let (ex, ey) = match self.kind {
            ShapeKind::Circle => (self.extent.0, self.extent.0),
            _ => self.extent,
        };
        (cx - ex, cy - ey, cx + ex, cy + ey)
    }
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub background_class: u8,
    pub background_color: [f64; 3],
    pub shapes: Vec<ShapeSpec>,
    pub seed: u64,
    /// Uniform per-pixel color noise amplitude (0 disables).
    #[serde(default)]
    pub jitter: f64,
    /// Antialias image boundaries by 4×4 supersampling; labels stay hard.
    #[serde(default)]
    pub soft_edges: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < super::MIN_SIDE || self.width < super::MIN_SIDE {
            return Err(invalid(format!(
                "canvas {}x{} too small",
                self.height, self.width
            )));
        }
        if self.num_classes == 0 || self.num_classes > 255 {
            return Err(invalid(format!(
                "num_classes {} outside 1..=255",
                self.num_classes
            )));
        }
        if self.background_class as usize >= self.num_classes {
            return Err(invalid(format!(
                "background class {} >= num_classes",
                self.background_class
            )));
        }
        if !(0.0..=1.0).contains(&self.jitter) {
            return Err(invalid("jitter must lie in [0, 1]"));
        }
        let in_unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !in_unit(&self.background_color) {
            return Err(invalid("background color outside [0, 1]"));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.class as usize >= self.num_classes {
                return Err(invalid(format!(
                    "shape {i}: class {} >= num_classes",
                    s.class
                )));
            }
            if !in_unit(&s.color) {
                return Err(invalid(format!("shape {i}: color outside [0, 1]")));
            }
            if !(s.extent.0 > 0.0 && s.extent.1 > 0.0) {
                return Err(invalid(format!("shape {i}: extent must be positive")));
            }
            let (x0, y0, x1, y1) = s.bounds();
            if x0 < 0.0 || y0 < 0.0 || x1 > self.width as f64 || y1 > self.height as f64 {
                return Err(invalid(format!("shape {i} does not fit inside the canvas")));
            }
        }
        Ok(())
    }
}

/// A rendered object: its visible pixels after later shapes are painted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape_index: usize,
    pub class: u8,
    pub mask: BinaryMask,
    pub bbox: Option<[usize; 4]>,
    pub area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub label: SegLabel,
    pub objects: Vec<SceneObject>,
}

/// Render a scene. Pure in `spec`: identical specs give bit-identical output.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut image = Image::filled(h, w, spec.background_color);
    let mut label = SegLabel::filled(h, w, spec.num_classes, spec.background_class);
    let mut owner: Vec<Option<usize>> = alloc::vec![None; h * w];

    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            if let Some(i) = spec.shapes.iter().rposition(|s| s.contains(px, py)) {
                owner[y * w + x] = Some(i);
                label.classes[y * w + x] = spec.shapes[i].class;
                image.set_pixel(y, x, spec.shapes[i].color);
            }
        }
    }

    if spec.soft_edges {
        antialias(spec, &mut image);
    }

    if spec.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in image.data.iter_mut() {
            let n: f64 = rng.random_range(-1.0..=1.0);
            *v = (*v + spec.jitter * n).clamp(0.0, 1.0);
        }
    }

    let objects = (0..spec.shapes.len())
        .map(|i| {
            let mask = BinaryMask {
                height: h,
                width: w,
                bits: owner.iter().map(|o| *o == Some(i)).collect(),
            };
            SceneObject {
                shape_index: i,
                class: spec.shapes[i].class,
                bbox: mask.bbox(),
                area_fraction: mask.area_fraction(),
                mask,
            }
        })
        .collect();

    Ok(Scene {
        image,
        label,
        objects,
    })
}

fn antialias(spec: &SceneSpec, image: &mut Image) {
    const SUB: usize = 4;
    for y in 0..spec.height {
        for x in 0..spec.width {
            let mut acc = [0.0; 3];
            for sy in 0..SUB {
                for sx in 0..SUB {
                    let px = x as f64 + (sx as f64 + 0.5) / SUB as f64;
                    let py = y as f64 + (sy as f64 + 0.5) / SUB as f64;
                    let color = spec
                        .shapes
                        .iter()
                        .rev()
                        .find(|s| s.contains(px, py))
                        .map_or(spec.background_color, |s| s.color);
                    for c in 0..3 {
                        acc[c] += color[c];
                    }
                }
            }
            let n = (SUB * SUB) as f64;
            image.set_pixel(y, x, [acc[0] / n, acc[1] / n, acc[2] / n]);
        }
    }
}

/// Human-readable name for a shape kind.
pub fn kind_name(kind: ShapeKind) -> String {
    String::from(match kind {
        ShapeKind::Circle => "circle",
        ShapeKind::Rectangle => "rectangle",
        ShapeKind::Triangle => "triangle",
        ShapeKind::Ellipse => "ellipse",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn one_circle() -> SceneSpec {
        SceneSpec {
            height: 32,
            width: 32,
            num_classes: 2,
            background_class: 0,
            background_color: [0.2, 0.6, 0.2],
            shapes: vec![ShapeSpec {
                kind: ShapeKind::Circle,
                class: 1,
                color: [1.0, 0.0, 0.0],
                center: (16.0, 16.0),
                extent: (8.0, 8.0),
            }],
            seed: 3,
            jitter: 0.0,
            soft_edges: false,
        }
    }

    #[test]
    fn one_circle_has_two_classes() {
        let scene = generate_scene(&one_circle()).unwrap();
        let hist = scene.label.histogram();
        assert!(hist[0] > 0 && hist[1] > 0);
        assert_eq!(hist.iter().filter(|&&c| c > 0).count(), 2);
        assert_eq!(scene.objects[0].mask, scene.label.class_mask(1));
    }

    #[test]
    fn rejects_shape_outside_canvas() {
        let mut spec = one_circle();
        spec.shapes[0].center = (4.0, 16.0);
        assert!(generate_scene(&spec).is_err());
        let mut spec = one_circle();
        spec.shapes[0].class = 2;
        assert!(generate_scene(&spec).is_err());
    }

    #[test]
    fn soft_edges_keep_hard_labels() {
        let mut spec = one_circle();
        let hard = generate_scene(&spec).unwrap();
        spec.soft_edges = true;
        let soft = generate_scene(&spec).unwrap();
        assert_eq!(hard.label, soft.label);
        assert_ne!(hard.image, soft.image);
        // Interior is untouched by antialiasing.
        assert_eq!(soft.image.pixel(16, 16), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn jitter_is_seeded() {
        let mut spec = one_circle();
        spec.jitter = 0.05;
        let a = generate_scene(&spec).unwrap();
        let b = generate_scene(&spec).unwrap();
        assert_eq!(a.image, b.image);
        spec.seed = 4;
        assert_ne!(a.image, generate_scene(&spec).unwrap().image);
    }
}
