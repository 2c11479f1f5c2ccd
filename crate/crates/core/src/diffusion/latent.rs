//! Conversion between pixel space and the toy latent space: 3 channels at
//! 1/4 resolution, average-pooled and mapped to [-1, 1].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;

use crate::error::{shape_err, Result};
use crate::scenes::{BinaryMask, Image, SegLabel, SoftMask};
use crate::tensor::{Latent, LatentShape, Mat};

pub const LATENT_FACTOR: usize = 4;
pub const LATENT_CHANNELS: usize = 3;

pub fn latent_shape_for(height: usize, width: usize) -> Result<LatentShape> {
    if height % LATENT_FACTOR != 0 || width % LATENT_FACTOR != 0 || height == 0 || width == 0 {
        return Err(shape_err(format!(
            "image {height}×{width} is not divisible by {LATENT_FACTOR}"
        )));
    }
    Ok(LatentShape {
        channels: LATENT_CHANNELS,
        height: height / LATENT_FACTOR,
        width: width / LATENT_FACTOR,
    })
}

/// Area-average `values` (row-major `height × width`) by `LATENT_FACTOR`.
fn pool(values: impl Fn(usize, usize) -> f64, shape: LatentShape) -> Vec<f64> {
    let f = LATENT_FACTOR;
    let norm = 1.0 / (f * f) as f64;
    let mut out = vec![0.0; shape.positions()];
    for ly in 0..shape.height {
        for lx in 0..shape.width {
            let mut s = 0.0;
            for dy in 0..f {
                for dx in 0..f {
                    s += values(ly * f + dy, lx * f + dx);
                }
            }
            out[ly * shape.width + lx] = s * norm;
        }
    }
    out
}

pub fn encode(image: &Image) -> Result<Latent> {
    let shape = latent_shape_for(image.height, image.width)?;
    let mut data = Vec::with_capacity(shape.len());
    for c in 0..LATENT_CHANNELS {
        data.extend(
            pool(|y, x| image.pixel(y, x)[c], shape)
                .into_iter()
                .map(|v| 2.0 * v - 1.0),
        );
    }
    Latent::from_vec(shape, data)
}

/// Bilinear upsampling of a latent-resolution plane to pixel resolution
/// (half-pixel centers, edge clamped).
pub fn upsample_plane(
    plane: &[f64],
    lh: usize,
    lw: usize,
    height: usize,
    width: usize,
) -> Vec<f64> {
    let sy = lh as f64 / height as f64;
    let sx = lw as f64 / width as f64;
    let coord = |o: usize, scale: f64, n: usize| {
        let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        let (y0, y1, fy) = coord(y, sy, lh);
        for x in 0..width {
            let (x0, x1, fx) = coord(x, sx, lw);
            let top = plane[y0 * lw + x0] * (1.0 - fx) + plane[y0 * lw + x1] * fx;
            let bot = plane[y1 * lw + x0] * (1.0 - fx) + plane[y1 * lw + x1] * fx;
            out[y * width + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

pub fn decode(latent: &Latent, height: usize, width: usize) -> Result<Image> {
    let shape = latent_shape_for(height, width)?;
    if shape != latent.shape {
        return Err(shape_err(format!(
            "latent {:?} does not decode to {height}×{width}",
            latent.shape
        )));
    }
    let n = shape.positions();
    let planes: Vec<Vec<f64>> = (0..LATENT_CHANNELS)
        .map(|c| {
            upsample_plane(
                &latent.data[c * n..(c + 1) * n],
                shape.height,
                shape.width,
                height,
                width,
            )
        })
        .collect();
    let mut data = Vec::with_capacity(height * width * 3);
    for p in 0..height * width {
        for plane in &planes {
            data.push(((plane[p] + 1.0) * 0.5).clamp(0.0, 1.0));
        }
    }
    Image::new(height, width, data)
}

/// Fraction of each latent cell covered by the mask.
pub fn downsample_mask(mask: &BinaryMask) -> Result<Vec<f64>> {
    let shape = latent_shape_for(mask.height, mask.width)?;
    Ok(pool(|y, x| if mask.at(y, x) { 1.0 } else { 0.0 }, shape))
}

pub fn downsample_soft_mask(mask: &SoftMask) -> Result<Vec<f64>> {
    let shape = latent_shape_for(mask.height, mask.width)?;
    Ok(pool(|y, x| mask.at(y, x), shape))
}

/// One-hot label map averaged to latent resolution (`positions × classes`);
/// ignore-index pixels contribute nothing.
pub fn structure_map(label: &SegLabel) -> Result<Mat> {
    let shape = latent_shape_for(label.height, label.width)?;
    let k = label.num_classes;
    let mut m = Mat::zeros(shape.positions(), k);
    let f = LATENT_FACTOR;
    let norm = 1.0 / (f * f) as f64;
    for y in 0..label.height {
        for x in 0..label.width {
            let c = label.at(y, x) as usize;
            if c < k {
                let p = (y / f) * shape.width + x / f;
                m.data[p * k + c] += norm;
            }
        }
    }
    Ok(m)
}
