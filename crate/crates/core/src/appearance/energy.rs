use alloc::vec::Vec;

use crate::diffusion::{downsample_mask, AttentionObjective, CrossAttention};
use crate::error::{invalid, Error, Result};
use crate::scenes::BinaryMask;

/// Edit mask at attention resolution: continuous cell coverage plus the
/// number of cells covered at least halfway (ΣM).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMask {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub count: usize,
}

impl LatentMask {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(invalid("latent mask size mismatch"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("latent mask values must lie in [0, 1]"));
        }
        let count = values.iter().filter(|&&v| v >= 0.5).count();
        Ok(Self {
            height,
            width,
            values,
            count,
        })
    }

    /// Area-average a pixel mask down to the latent grid.
    pub fn from_pixels(mask: &BinaryMask) -> Result<Self> {
        let f = crate::diffusion::LATENT_FACTOR;
        Self::new(mask.height / f, mask.width / f, downsample_mask(mask)?)
    }
}

/// Eq.-5 style concentration energy of the edit tokens inside the mask:
/// `L = (1 − (1/ΣM)·Σ_p M_p·Σ_{j∈S'}Â_pj / Σ_n Â_pn)²`, with Â averaged
/// over heads. `include_special` keeps column 0 (the start token) in the
/// denominator.
#[derive(Debug, Clone)]
pub struct MaskEnergy<'a> {
    pub edit_columns: &'a [usize],
    pub mask: &'a LatentMask,
    pub include_special: bool,
}

impl MaskEnergy<'_> {
    fn check(&self, attn: &CrossAttention) -> Result<()> {
        if self.mask.count == 0 {
            return Err(Error::EmptyMask);
        }
        if attn.height != self.mask.height || attn.width != self.mask.width {
            return Err(invalid("mask and attention resolutions differ"));
        }
        if self.edit_columns.is_empty() || self.edit_columns.iter().any(|&j| j >= attn.tokens) {
            return Err(invalid("edit token indices outside the prompt"));
        }
        Ok(())
    }

    fn first_column(&self) -> usize {
        if self.include_special {
            0
        } else {
            1
        }
    }

    /// Head-averaged attention row at `p`.
    fn mean_row(attn: &CrossAttention, p: usize, row: &mut [f64]) {
        row.iter_mut().for_each(|v| *v = 0.0);
        for h in 0..attn.heads {
            for (r, w) in row.iter_mut().zip(attn.weights(h, p)) {
                *r += w;
            }
        }
        let inv = 1.0 / attn.heads as f64;
        row.iter_mut().for_each(|v| *v *= inv);
    }

    /// Per-location ratios and the mask-weighted average R.
    fn ratios(&self, attn: &CrossAttention) -> Result<(Vec<(f64, f64)>, f64)> {
        self.check(attn)?;
        let first = self.first_column();
        let mut row = alloc::vec![0.0; attn.tokens];
        let mut per = Vec::with_capacity(attn.positions());
        let mut acc = 0.0;
        for p in 0..attn.positions() {
            let m = self.mask.values[p];
            if m == 0.0 {
                per.push((0.0, 0.0));
                continue;
            }
            Self::mean_row(attn, p, &mut row);
            let den: f64 = row[first..].iter().sum();
            if den <= 0.0 {
                return Err(Error::ZeroAttention {
                    row: p / attn.width,
                    col: p % attn.width,
                });
            }
            let num: f64 = self
                .edit_columns
                .iter()
                .filter(|&&j| j >= first)
                .map(|&j| row[j])
                .sum();
            per.push((num / den, den));
            acc += m * num / den;
        }
        Ok((per, acc / self.mask.count as f64))
    }

    pub fn value(&self, attn: &CrossAttention) -> Result<f64> {
        let (_, r) = self.ratios(attn)?;
        Ok((1.0 - r) * (1.0 - r))
    }
}

/// Free-function form of [`MaskEnergy::value`].
pub fn mask_energy(
    attn: &CrossAttention,
    edit_columns: &[usize],
    mask: &LatentMask,
    include_special: bool,
) -> Result<f64> {
    MaskEnergy {
        edit_columns,
        mask,
        include_special,
    }
    .value(attn)
}

impl AttentionObjective for MaskEnergy<'_> {
    fn value_and_grad(&self, attn: &CrossAttention) -> Result<(f64, CrossAttention)> {
        let (per, r) = self.ratios(attn)?;
        let value = (1.0 - r) * (1.0 - r);
        let dl_dr = -2.0 * (1.0 - r) / self.mask.count as f64;
        let first = self.first_column();
        let mut grad = CrossAttention::zeros(attn.heads, attn.height, attn.width, attn.tokens);
        let inv_heads = 1.0 / attn.heads as f64;
        for (p, &(ratio, den)) in per.iter().enumerate() {
            let m = self.mask.values[p];
            if m == 0.0 {
                continue;
            }
            // d ratio / d Â_pj = (1[j ∈ S'] − ratio) / den over the denominator columns
            let scale = dl_dr * m / den * inv_heads;
            for j in first..attn.tokens {
                let ind = if self.edit_columns.contains(&j) {
                    1.0
                } else {
                    0.0
                };
                let g = scale * (ind - ratio);
                for h in 0..attn.heads {
                    let i = grad.index(h, p, j);
                    grad.data[i] = g;
                }
            }
        }
        Ok((value, grad))
    }
}
