use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};
use crate::scenes::{BinaryMask, Image, SegLabel, Sized2d};

const MAX_DIRECTION_TRIES: usize = 32;

/// `p' = anchor + E·(p − anchor) + B` in pixel coordinates (x right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub e_x: f64,
    pub e_y: f64,
    pub b_x: f64,
    pub b_y: f64,
    /// `(x, y)` of the scaling center.
    pub anchor: (f64, f64),
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            e_x: 1.0,
            e_y: 1.0,
            b_x: 0.0,
            b_y: 0.0,
            anchor: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_x > 0.0 && self.e_y > 0.0) || !self.b_x.is_finite() || !self.b_y.is_finite() {
            return Err(invalid(
                "scale factors must be positive and translation finite",
            ));
        }
        Ok(())
    }

    pub fn forward(&self, x: f64, y: f64) -> (f64, f64) {
        let (ax, ay) = self.anchor;
        (
            ax + self.e_x * (x - ax) + self.b_x,
            ay + self.e_y * (y - ay) + self.b_y,
        )
    }

    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let (ax, ay) = self.anchor;
        (
            ax + (x - self.b_x - ax) / self.e_x,
            ay + (y - self.b_y - ay) / self.e_y,
        )
    }

    /// Whether the mask's bounding box stays inside a `height × width` canvas.
    pub fn keeps_inside(&self, mask: &BinaryMask) -> bool {
        let Some([x0, y0, x1, y1]) = mask.bbox() else {
            return true;
        };
        let (ax, ay) = self.forward(x0 as f64, y0 as f64);
        let (bx, by) = self.forward(x1 as f64, y1 as f64);
        let eps = 1e-9;
        ax >= -eps && ay >= -eps && bx <= mask.width as f64 + eps && by <= mask.height as f64 + eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Size,
    Position,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Size => "size",
            Self::Position => "position",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryEditSpec {
    pub kind: GeometryKind,
    /// Size: reduction fraction (`e = 1 − level`). Position: shift as a
    /// fraction of the shorter image side.
    pub level: f64,
    pub seed: u64,
}

/// Transform realizing `spec` for an object, plus the direction angle in
/// degrees for position edits.
pub fn make_transform(
    spec: &GeometryEditSpec,
    object: &BinaryMask,
) -> Result<(RigidTransform, Option<f64>)> {
    if !(spec.level > 0.0 && spec.level < 1.0) {
        return Err(invalid("geometry level must lie in (0, 1)"));
    }
    let (cy, cx) = object.centroid().ok_or(Error::EmptyMask)?;
    match spec.kind {
        GeometryKind::Size => {
            let e = 1.0 - spec.level;
            let t = RigidTransform {
                e_x: e,
                e_y: e,
                b_x: 0.0,
                b_y: 0.0,
                anchor: (cx, cy),
            };
            if !t.keeps_inside(object) {
                return Err(Error::OutOfBounds);
            }
            Ok((t, None))
        }
        GeometryKind::Position => {
            let dist = spec.level * object.height.min(object.width) as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..MAX_DIRECTION_TRIES {
                let angle: f64 = rng.random_range(0.0..2.0 * PI);
                let t = RigidTransform {
                    e_x: 1.0,
                    e_y: 1.0,
                    b_x: dist * angle.cos(),
                    b_y: dist * angle.sin(),
                    anchor: (cx, cy),
                };
                if t.keeps_inside(object) {
                    return Ok((t, Some(angle.to_degrees())));
                }
            }
            Err(Error::OutOfBounds)
        }
    }
}

/// Move the object's entries of a row-major plane. Source object pixels
/// become `placeholder`; every destination pixel whose nearest-neighbor
/// preimage is an object pixel takes that pixel's value. Returns the plane
/// and the transformed object mask M*.
pub fn apply_rigid_plane<T: Copy>(
    plane: &[T],
    object: &BinaryMask,
    transform: &RigidTransform,
    placeholder: T,
) -> Result<(Vec<T>, BinaryMask)> {
    transform.validate()?;
    let (h, w) = (object.height, object.width);
    if plane.len() != h * w {
        return Err(shape_err("plane and mask sizes differ"));
    }
    if object.is_empty() {
        return Err(Error::EmptyMask);
    }
    if !transform.keeps_inside(object) {
        return Err(Error::OutOfBounds);
    }
    let mut out: Vec<T> = plane
        .iter()
        .enumerate()
        .map(|(i, &v)| if object.bits[i] { placeholder } else { v })
        .collect();
    let mut moved = BinaryMask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = transform.inverse(x as f64 + 0.5, y as f64 + 0.5);
            let (sx, sy) = (sx.floor(), sy.floor());
            if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
                continue;
            }
            let src = sy as usize * w + sx as usize;
            if object.bits[src] {
                out[y * w + x] = plane[src];
                moved.bits[y * w + x] = true;
            }
        }
    }
    Ok((out, moved))
}

/// Transformed image, label and mask. Vacated pixels hold `fill` in the
/// image and the ignore index in the label until inpainting relabels them.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidResult {
    pub image: Image,
    pub label: SegLabel,
    pub mask: BinaryMask,
}

pub fn apply_rigid(
    image: &Image,
    label: &SegLabel,
    object: &BinaryMask,
    transform: &RigidTransform,
    fill: [f64; 3],
) -> Result<RigidResult> {
    label.check_same_size(image)?;
    if object.height() != image.height || object.width() != image.width {
        return Err(shape_err("object mask and image sizes differ"));
    }
    let pixels: Vec<[f64; 3]> = image.data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    let (pix, mask) = apply_rigid_plane(&pixels, object, transform, fill)?;
    let (classes, _) = apply_rigid_plane(
        &label.classes,
        object,
        transform,
        crate::scenes::IGNORE_INDEX,
    )?;
    let image = Image::new(
        image.height,
        image.width,
        pix.into_iter().flatten().collect(),
    )?;
    let label = SegLabel {
        height: label.height,
        width: label.width,
        num_classes: label.num_classes,
        classes,
    };
    Ok(RigidResult { image, label, mask })
}

/// `M − (M ∩ M*)`: the area the object vacated.
pub fn remaining_mask(m: &BinaryMask, m_star: &BinaryMask) -> Result<BinaryMask> {
    if m.height != m_star.height || m.width != m_star.width {
        return Err(shape_err("masks differ in size"));
    }
    Ok(m.and_not(&m.and(m_star)))
}
