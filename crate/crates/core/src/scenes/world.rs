//! A small procedural world: named classes with canonical colors and
//! shapes, a color palette, and a caption template.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{SceneSpec, ShapeKind, ShapeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedColor {
    pub name: String,
    pub rgb: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ClassRole {
    Background {
        color: [f64; 3],
        preposition: String,
    },
    Object {
        kind: ShapeKind,
        color: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    #[serde(flatten)]
    pub role: ClassRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneWorld {
    pub height: usize,
    pub width: usize,
    pub classes: Vec<ClassInfo>,
    pub palette: Vec<NamedColor>,
    /// Maximum number of shapes per scene.
    pub max_objects: usize,
    /// Area-fraction range of the leading (salient) object.
    pub salient_area: (f64, f64),
    /// Area-fraction range of the remaining objects.
    pub extra_area: (f64, f64),
    /// Probability that the leading object is small instead of salient.
    pub small_lead_prob: f64,
    /// Probability that an object is painted in a non-canonical palette color.
    pub color_variation: f64,
    pub jitter: f64,
}

fn color(name: &str, rgb: [f64; 3]) -> NamedColor {
    NamedColor {
        name: name.to_string(),
        rgb,
    }
}

fn background(name: &str, rgb: [f64; 3], prep: &str) -> ClassInfo {
    ClassInfo {
        name: name.to_string(),
        role: ClassRole::Background {
            color: rgb,
            preposition: prep.to_string(),
        },
    }
}

fn object(name: &str, kind: ShapeKind, color: &str) -> ClassInfo {
    ClassInfo {
        name: name.to_string(),
        role: ClassRole::Object {
            kind,
            color: color.to_string(),
        },
    }
}

impl SceneWorld {
    /// Three background classes, four object classes and an eight-color palette.
    pub fn standard(size: usize) -> Self {
        Self {
            height: size,
            width: size,
            classes: vec![
                background("grass", [0.42, 0.66, 0.35], "on"),
                background("sky", [0.62, 0.80, 0.95], "in"),
                background("sand", [0.86, 0.78, 0.60], "on"),
                object("ball", ShapeKind::Circle, "red"),
                object("box", ShapeKind::Rectangle, "yellow"),
                object("kite", ShapeKind::Triangle, "purple"),
                object("egg", ShapeKind::Ellipse, "white"),
            ],
            palette: vec![
                color("red", [0.86, 0.16, 0.16]),
                color("blue", [0.16, 0.30, 0.86]),
                color("green", [0.18, 0.62, 0.20]),
                color("yellow", [0.92, 0.84, 0.20]),
                color("white", [0.95, 0.95, 0.95]),
                color("black", [0.10, 0.10, 0.10]),
                color("brown", [0.55, 0.34, 0.16]),
                color("purple", [0.56, 0.22, 0.72]),
            ],
            max_objects: 2,
            salient_area: (0.22, 0.36),
            extra_area: (0.03, 0.07),
            small_lead_prob: 0.15,
            color_variation: 0.0,
            jitter: 0.0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn background_classes(&self) -> Vec<u8> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.role, ClassRole::Background { .. }))
            .map(|(i, _)| i as u8)
            .collect()
    }

    fn object_classes(&self) -> Vec<u8> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.role, ClassRole::Object { .. }))
            .map(|(i, _)| i as u8)
            .collect()
    }

    pub fn palette_color(&self, name: &str) -> Option<[f64; 3]> {
        self.palette.iter().find(|c| c.name == name).map(|c| c.rgb)
    }

    /// Exact palette name of `rgb`, if it is a palette color.
    pub fn color_name(&self, rgb: [f64; 3]) -> Option<&str> {
        self.palette
            .iter()
            .find(|c| c.rgb == rgb)
            .map(|c| c.name.as_str())
    }

    /// Canonical color of a class.
    pub fn class_color(&self, class: u8) -> Option<[f64; 3]> {
        match &self.classes.get(class as usize)?.role {
            ClassRole::Background { color, .. } => Some(*color),
            ClassRole::Object { color, .. } => self.palette_color(color),
        }
    }

    /// Draw a scene spec. Object colors are canonical unless
    /// `color_variation` picks another palette entry.
    pub fn sample_spec(&self, seed: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce7e);
        let backgrounds = self.background_classes();
        let objects = self.object_classes();
        let bg = backgrounds[rng.random_range(0..backgrounds.len())];
        let background_color = self.class_color(bg).unwrap_or([0.5; 3]);
        let n = rng.random_range(1..=self.max_objects.max(1));
        let canvas = (self.height * self.width) as f64;

        let mut shapes = Vec::with_capacity(n);
        for i in 0..n {
            let class = objects[rng.random_range(0..objects.len())];
            let ClassRole::Object { kind, color } = &self.classes[class as usize].role else {
                unreachable!()
            };
            let (lo, hi) = if i == 0 && !rng.random_bool(self.small_lead_prob) {
                self.salient_area
            } else {
                self.extra_area
            };
            let area = rng.random_range(lo..=hi) * canvas;
            let aspect: f64 = rng.random_range(0.75..=1.33);
            let extent = match kind {
                ShapeKind::Circle => {
                    let r = (area / core::f64::consts::PI).sqrt();
                    (r, r)
                }
                ShapeKind::Ellipse => {
                    let b = (area / (core::f64::consts::PI * aspect)).sqrt();
                    (b * aspect, b)
                }
                ShapeKind::Rectangle => {
                    let b = (area / (4.0 * aspect)).sqrt();
                    (b * aspect, b)
                }
                ShapeKind::Triangle => {
                    let b = (area / (2.0 * aspect)).sqrt();
                    (b * aspect, b)
                }
            };
            let max_x = self.width as f64 / 2.0 - 1.0;
            let max_y = self.height as f64 / 2.0 - 1.0;
            let extent = (extent.0.min(max_x), extent.1.min(max_y));
            let cx = rng.random_range(extent.0..=self.width as f64 - extent.0);
            let cy = rng.random_range(extent.1..=self.height as f64 - extent.1);
            let canonical = self.palette_color(color).unwrap_or([0.5; 3]);
            let fill = if rng.random_bool(self.color_variation) {
                self.palette[rng.random_range(0..self.palette.len())].rgb
            } else {
                canonical
            };
            shapes.push(ShapeSpec {
                kind: *kind,
                class,
                color: fill,
                center: (cx, cy),
                extent,
            });
        }

        SceneSpec {
            height: self.height,
            width: self.width,
            num_classes: self.num_classes(),
            background_class: bg,
            background_color,
            shapes,
            seed,
            jitter: self.jitter,
            soft_edges: false,
        }
    }

    /// Copies of `spec` with the leading object painted in each palette
    /// color, for color augmentation of training data.
    pub fn recolor_variants(&self, spec: &SceneSpec) -> Vec<SceneSpec> {
        if spec.shapes.is_empty() {
            return vec![spec.clone()];
        }
        self.palette
            .iter()
            .map(|c| {
                let mut s = spec.clone();
                s.shapes[0].color = c.rgb;
                s
            })
            .collect()
    }

    /// Caption naming the leading object, its color and the background,
    /// e.g. `"a photo of a red ball on the grass"`.
    pub fn caption(&self, spec: &SceneSpec) -> String {
        let bg = &self.classes[spec.background_class as usize];
        let prep = match &bg.role {
            ClassRole::Background { preposition, .. } => preposition.as_str(),
            ClassRole::Object { .. } => "on",
        };
        match spec.shapes.first() {
            Some(s) => {
                let noun = &self.classes[s.class as usize].name;
                match self.color_name(s.color) {
                    Some(c) => format!("a photo of a {c} {noun} {prep} the {}", bg.name),
                    None => format!("a photo of a {noun} {prep} the {}", bg.name),
                }
            }
            None => format!("a photo of the {}", bg.name),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenes::generate_scene;

    #[test]
    fn sampled_specs_are_valid_and_seeded() {
        let world = SceneWorld::standard(48);
        for seed in 0..50 {
            let spec = world.sample_spec(seed);
            spec.validate().unwrap();
            assert_eq!(spec, world.sample_spec(seed));
            generate_scene(&spec).unwrap();
        }
        assert_ne!(world.sample_spec(1), world.sample_spec(2));
    }

    #[test]
    fn caption_names_color_and_background() {
        let world = SceneWorld::standard(32);
        let spec = SceneSpec {
            height: 32,
            width: 32,
            num_classes: 7,
            background_class: 0,
            background_color: world.class_color(0).unwrap(),
            shapes: vec![ShapeSpec {
                kind: ShapeKind::Circle,
                class: 3,
                color: world.palette_color("red").unwrap(),
                center: (16.0, 16.0),
                extent: (8.0, 8.0),
            }],
            seed: 0,
            jitter: 0.0,
            soft_edges: false,
        };
        assert_eq!(world.caption(&spec), "a photo of a red ball on the grass");
    }
}
