use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::tensor::{Latent, LatentShape, Mat};

/// Per-token spatial attention of one layer, stored `[head][position][token]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention {
    pub heads: usize,
    pub height: usize,
    pub width: usize,
    pub tokens: usize,
    pub data: Vec<f64>,
}

impl CrossAttention {
    pub fn zeros(heads: usize, height: usize, width: usize, tokens: usize) -> Self {
        Self {
            heads,
            height,
            width,
            tokens,
            data: vec![0.0; heads * height * width * tokens],
        }
    }

    /// Assemble from per-head `positions × tokens` matrices.
    pub fn from_heads(height: usize, width: usize, heads: &[Mat]) -> Result<Self> {
        let tokens = heads.first().map_or(0, |m| m.cols);
        let mut data = Vec::with_capacity(heads.len() * height * width * tokens);
        for m in heads {
            if m.rows != height * width || m.cols != tokens {
                return Err(shape_err(format!(
                    "attention head is {}×{}, expected {}×{}",
                    m.rows,
                    m.cols,
                    height * width,
                    tokens
                )));
            }
            data.extend_from_slice(&m.data);
        }
        Ok(Self {
            heads: heads.len(),
            height,
            width,
            tokens,
            data,
        })
    }

    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, head: usize, pos: usize, token: usize) -> usize {
        (head * self.positions() + pos) * self.tokens + token
    }

    pub fn get(&self, head: usize, pos: usize, token: usize) -> f64 {
        self.data[self.index(head, pos, token)]
    }

    /// Token weights of one head at one location.
    pub fn weights(&self, head: usize, pos: usize) -> &[f64] {
        let i = self.index(head, pos, 0);
        &self.data[i..i + self.tokens]
    }

    /// One head as a `positions × tokens` matrix.
    pub fn head(&self, head: usize) -> Mat {
        let n = self.positions() * self.tokens;
        Mat {
            rows: self.positions(),
            cols: self.tokens,
            data: self.data[head * n..(head + 1) * n].to_vec(),
        }
    }

    /// Spatial map of one token averaged over heads.
    pub fn token_map(&self, token: usize) -> Vec<f64> {
        (0..self.positions())
            .map(|p| {
                (0..self.heads).map(|h| self.get(h, p, token)).sum::<f64>() / self.heads as f64
            })
            .collect()
    }

    /// Largest deviation of any per-location token sum from 1.
    pub fn max_normalization_error(&self) -> f64 {
        self.data
            .chunks(self.tokens.max(1))
            .map(|w| (w.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Conditioning passed with every denoiser call.
#[derive(Debug, Clone, Copy)]
pub struct Conditioning<'a> {
    pub tokens: &'a [u32],
    /// One-hot label map at latent resolution, `positions × classes`.
    pub structure: Option<&'a Mat>,
}

impl<'a> Conditioning<'a> {
    pub fn text(tokens: &'a [u32]) -> Self {
        Self {
            tokens,
            structure: None,
        }
    }
}

/// Internal tensors to substitute during a forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub features: BTreeMap<String, Mat>,
    pub self_attn: BTreeMap<String, Mat>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.self_attn.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub eps: Latent,
    pub features: BTreeMap<String, Mat>,
    pub self_attn: BTreeMap<String, Mat>,
    pub cross_attn: BTreeMap<String, CrossAttention>,
}

/// Scalar function of a cross-attention layer with its gradient.
pub trait AttentionObjective {
    fn value_and_grad(&self, attn: &CrossAttention) -> Result<(f64, CrossAttention)>;
}

#[derive(Debug, Clone)]
pub struct AttentionGradient {
    pub value: f64,
    /// d value / d z.
    pub grad: Latent,
    pub output: DenoiseOutput,
}

/// Noise predictor ε_θ with capture and override hooks.
pub trait Denoiser: Sync {
    fn latent_shape(&self) -> LatentShape;

    /// Name of the cross-attention layer used for guidance.
    fn guidance_layer(&self) -> &str;

    fn denoise(
        &self,
        z: &Latent,
        t: usize,
        cond: &Conditioning<'_>,
        overrides: Option<&Overrides>,
    ) -> Result<DenoiseOutput>;

    /// Evaluate `objective` on the cross-attention of `layer` and
    /// differentiate it with respect to `z`.
    fn attention_gradient(
        &self,
        z: &Latent,
        t: usize,
        cond: &Conditioning<'_>,
        layer: &str,
        objective: &dyn AttentionObjective,
    ) -> Result<AttentionGradient>;
}
