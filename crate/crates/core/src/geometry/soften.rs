use alloc::vec;

use crate::scenes::{BinaryMask, SoftMask};

/// Square dilation with a `(2r+1) × (2r+1)` structuring element.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (h, w) = (mask.height, mask.width);
    // separable: rows then columns
    let mut rows = BinaryMask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            rows.bits[y * w + x] = (lo..=hi).any(|xx| mask.bits[y * w + xx]);
        }
    }
    let mut out = BinaryMask::empty(h, w);
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for x in 0..w {
            out.bits[y * w + x] = (lo..=hi).any(|yy| rows.bits[yy * w + x]);
        }
    }
    out
}

/// Dilate by a 5×5 square, then replace every pixel of the boundary band
/// (3×3 neighborhood holding both values) by its 3×3 in-bounds mean.
pub fn soften_mask(mask: &BinaryMask) -> SoftMask {
    let (h, w) = (mask.height, mask.width);
    let d = dilate(mask, 2);
    let mut values = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let (mut on, mut n) = (0usize, 0usize);
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    n += 1;
                    on += usize::from(d.bits[yy * w + xx]);
                }
            }
            values[y * w + x] = if on == 0 {
                0.0
            } else if on == n {
                1.0
            } else {
                on as f64 / n as f64
            };
        }
    }
    SoftMask {
        height: h,
        width: w,
        values,
    }
}
