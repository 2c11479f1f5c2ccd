use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Error, Result};

/// Label value excluded from evaluation and filtering.
pub const IGNORE_INDEX: u8 = 255;

/// Smallest image side accepted by the pipeline.
pub const MIN_SIDE: usize = 8;

/// RGB image with channel values in `[0, 1]`, stored row-major with
/// interleaved channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height < MIN_SIDE || width < MIN_SIDE {
            return Err(invalid(alloc::format!(
                "image {height}x{width} below {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if data.len() != height * width * 3 {
            return Err(shape_err(alloc::format!(
                "{} values for a {height}x{width} RGB image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(alloc::format!(
                "channel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, color: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&color);
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn same_size<T: Sized2d>(&self, other: &T) -> bool {
        self.height == other.height() && self.width == other.width()
    }

    /// Mean absolute channel difference over pixels selected by `region`
    /// (all pixels when `None`).
    pub fn mean_abs_diff(&self, other: &Image, region: Option<&BinaryMask>) -> Result<f64> {
        if self.height != other.height || self.width != other.width {
            return Err(shape_err("images differ in size"));
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for p in 0..self.pixels() {
            if region.is_some_and(|m| !m.bits[p]) {
                continue;
            }
            for c in 0..3 {
                sum += (self.data[p * 3 + c] - other.data[p * 3 + c]).abs();
            }
            count += 3;
        }
        if count == 0 {
            return Err(Error::EmptyEvaluation);
        }
        Ok(sum / count as f64)
    }

    /// Rounded to the nearest 8-bit level, as stored in a PNG.
    pub fn quantized(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Peak signal-to-noise ratio in dB for unit-range images.
    pub fn psnr(&self, other: &Image) -> Result<f64> {
        if self.height != other.height || self.width != other.width {
            return Err(shape_err("images differ in size"));
        }
        let mse = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.data.len() as f64;
        Ok(if mse == 0.0 {
            f64::INFINITY
        } else {
            -10.0 * mse.log10()
        })
    }
}

/// Per-pixel class indices; [`IGNORE_INDEX`] marks unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegLabel {
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub classes: Vec<u8>,
}

impl SegLabel {
    pub fn new(height: usize, width: usize, num_classes: usize, classes: Vec<u8>) -> Result<Self> {
        if num_classes == 0 || num_classes > IGNORE_INDEX as usize {
            return Err(invalid(alloc::format!(
                "num_classes {num_classes} outside 1..=255"
            )));
        }
        if classes.len() != height * width {
            return Err(shape_err(alloc::format!(
                "{} labels for {height}x{width}",
                classes.len()
            )));
        }
        if let Some(&v) = classes
            .iter()
            .find(|&&v| v != IGNORE_INDEX && v as usize >= num_classes)
        {
            return Err(Error::LabelOutOfRange {
                value: v as usize,
                num_classes,
            });
        }
        Ok(Self {
            height,
            width,
            num_classes,
            classes,
        })
    }

    pub fn filled(height: usize, width: usize, num_classes: usize, class: u8) -> Self {
        Self {
            height,
            width,
            num_classes,
            classes: vec![class; height * width],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Mask of pixels carrying `class`.
    pub fn class_mask(&self, class: u8) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.classes.iter().map(|&c| c == class).collect(),
        }
    }

    /// Pixel count per class (ignored pixels excluded).
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &c in &self.classes {
            if c != IGNORE_INDEX {
                counts[c as usize] += 1;
            }
        }
        counts
    }

    pub fn check_same_size<T: Sized2d>(&self, other: &T) -> Result<()> {
        if self.height != other.height() || self.width != other.width() {
            return Err(shape_err(alloc::format!(
                "{}x{} vs {}x{}",
                self.height,
                self.width,
                other.height(),
                other.width()
            )));
        }
        Ok(())
    }
}

/// Boolean pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            bits,
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn area_fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> BinaryMask {
        self.zip(other, |a, b| a && !b)
    }

    pub fn not(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    fn zip(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> BinaryMask {
        debug_assert_eq!((self.height, self.width), (other.height, other.width));
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Mean pixel coordinate `(y, x)` of the set pixels, using pixel centers.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sy, mut sx, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.at(y, x) {
                    sy += y as f64 + 0.5;
                    sx += x as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sy / n as f64, sx / n as f64))
    }

    /// Inclusive-exclusive bounding box `[x0, y0, x1, y1]`.
    pub fn bbox(&self) -> Option<[usize; 4]> {
        let mut bb: Option<[usize; 4]> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.at(y, x) {
                    let b = bb.get_or_insert([x, y, x + 1, y + 1]);
                    b[0] = b[0].min(x);
                    b[1] = b[1].min(y);
                    b[2] = b[2].max(x + 1);
                    b[3] = b[3].max(y + 1);
                }
            }
        }
        bb
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let inter = self.and(other).count();
        let union = self.or(other).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn to_soft(&self) -> SoftMask {
        SoftMask {
            height: self.height,
            width: self.width,
            values: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Real-valued mask in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftMask {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SoftMask {
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn support(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|&v| v > 0.0).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Anything with a pixel grid size.
pub trait Sized2d {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
}

macro_rules! sized2d {
    ($($t:ty),*) => {$(
        impl Sized2d for $t {
            fn height(&self) -> usize { self.height }
            fn width(&self) -> usize { self.width }
        }
    )*};
}
sized2d!(Image, SegLabel, BinaryMask, SoftMask);
