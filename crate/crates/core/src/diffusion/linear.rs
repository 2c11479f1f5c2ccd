use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::denoiser::{
    AttentionGradient, AttentionObjective, Conditioning, CrossAttention, DenoiseOutput, Denoiser,
    Overrides,
};
use crate::autodiff::Tape;
use crate::error::{invalid, shape_err, Result};
use crate::tensor::{Latent, LatentShape, Mat};

pub const LINEAR_ATTENTION_LAYER: &str = "up0";

/// Test double with `eps = A·vec(z) + b` and a closed-form attention
/// generator: logits `s[p][n] = Σ_c w[k_n][c]·z[c][p] + u[k_n]`, softmaxed
/// over tokens, where `(w, u)` are drawn from a stream seeded by the token id.
#[derive(Debug, Clone)]
pub struct LinearDenoiser {
    shape: LatentShape,
    a: Mat,
    b: Vec<f64>,
    attention_seed: u64,
    attention_scale: f64,
}

impl LinearDenoiser {
    pub fn new(shape: LatentShape, a: Mat, b: Vec<f64>, attention_seed: u64) -> Result<Self> {
        let n = shape.len();
        if a.rows != n || a.cols != n || b.len() != n {
            return Err(shape_err(format!(
                "linear denoiser needs {n}×{n} map and {n} bias"
            )));
        }
        if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(invalid("linear denoiser coefficients must be finite"));
        }
        Ok(Self {
            shape,
            a,
            b,
            attention_seed,
            attention_scale: 1.0,
        })
    }

    /// `A = 0`, `b = 0`: predicts zero noise everywhere.
    pub fn zero(shape: LatentShape, attention_seed: u64) -> Self {
        let n = shape.len();
        Self {
            shape,
            a: Mat::zeros(n, n),
            b: alloc::vec![0.0; n],
            attention_seed,
            attention_scale: 1.0,
        }
    }

    /// Entries of `A` and `b` uniform in `[-scale, scale]`.
    pub fn random(shape: LatentShape, scale: f64, seed: u64) -> Self {
        let n = shape.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-scale..=scale));
        let b = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
        Self {
            shape,
            a,
            b,
            attention_seed: seed ^ 0x5eed,
            attention_scale: 1.0,
        }
    }

    pub fn with_attention_scale(mut self, scale: f64) -> Self {
        self.attention_scale = scale;
        self
    }

    /// Per-token attention parameters: `w` (one weight per channel) and `u`.
    pub fn token_params(&self, token: u32) -> (Vec<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.attention_seed ^ (u64::from(token).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        );
        let w = (0..self.shape.channels)
            .map(|_| self.attention_scale * rng.random_range(-1.0..1.0))
            .collect();
        let u = self.attention_scale * rng.random_range(-1.0..1.0);
        (w, u)
    }

    fn attention_params(&self, tokens: &[u32]) -> (Mat, Mat) {
        let c = self.shape.channels;
        let mut w = Mat::zeros(c, tokens.len());
        let mut u = Mat::zeros(1, tokens.len());
        for (n, &tok) in tokens.iter().enumerate() {
            let (wt, ut) = self.token_params(tok);
            for ch in 0..c {
                w.set(ch, n, wt[ch]);
            }
            u.data[n] = ut;
        }
        (w, u)
    }

    fn eps(&self, z: &Latent) -> Result<Latent> {
        let n = self.shape.len();
        let mut out = self.b.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += crate::tensor::dot(&self.a.data[i * n..(i + 1) * n], &z.data);
        }
        Latent::from_vec(self.shape, out)
    }

    fn check(&self, z: &Latent, cond: &Conditioning<'_>) -> Result<()> {
        if z.shape != self.shape {
            return Err(shape_err(format!(
                "latent {:?} vs denoiser {:?}",
                z.shape, self.shape
            )));
        }
        if cond.tokens.is_empty() {
            return Err(invalid("empty token sequence"));
        }
        Ok(())
    }
}

impl Denoiser for LinearDenoiser {
    fn latent_shape(&self) -> LatentShape {
        self.shape
    }

    fn guidance_layer(&self) -> &str {
        LINEAR_ATTENTION_LAYER
    }

    fn denoise(
        &self,
        z: &Latent,
        _t: usize,
        cond: &Conditioning<'_>,
        _overrides: Option<&Overrides>,
    ) -> Result<DenoiseOutput> {
        self.check(z, cond)?;
        let mut tape = Tape::new();
        let (w, u) = self.attention_params(cond.tokens);
        let zr = tape.constant(z.to_rows());
        let wv = tape.constant(w);
        let uv = tape.constant(u);
        let s = tape.matmul(zr, wv);
        let s = tape.add_row(s, uv);
        let a = tape.softmax_rows(s);
        let attn = CrossAttention::from_heads(
            self.shape.height,
            self.shape.width,
            &[tape.value(a).clone()],
        )?;
        let mut cross_attn = BTreeMap::new();
        cross_attn.insert(LINEAR_ATTENTION_LAYER.to_string(), attn);
        Ok(DenoiseOutput {
            eps: self.eps(z)?,
            features: BTreeMap::new(),
            self_attn: BTreeMap::new(),
            cross_attn,
        })
    }

    fn attention_gradient(
        &self,
        z: &Latent,
        _t: usize,
        cond: &Conditioning<'_>,
        layer: &str,
        objective: &dyn AttentionObjective,
    ) -> Result<AttentionGradient> {
        self.check(z, cond)?;
        if layer != LINEAR_ATTENTION_LAYER {
            return Err(invalid(format!("unknown attention layer {layer:?}")));
        }
        let mut tape = Tape::new();
        let (w, u) = self.attention_params(cond.tokens);
        let zr = tape.variable(z.to_rows());
        let wv = tape.constant(w);
        let uv = tape.constant(u);
        let s = tape.matmul(zr, wv);
        let s = tape.add_row(s, uv);
        let a = tape.softmax_rows(s);
        let attn = CrossAttention::from_heads(
            self.shape.height,
            self.shape.width,
            &[tape.value(a).clone()],
        )?;
        let (value, g) = objective.value_and_grad(&attn)?;
        let mut grads = tape.backward(&[(a, &g.head(0))]);
        let gz = grads
            .take(zr)
            .unwrap_or_else(|| Mat::zeros(self.shape.positions(), self.shape.channels));
        let mut cross_attn = BTreeMap::new();
        cross_attn.insert(LINEAR_ATTENTION_LAYER.to_string(), attn);
        let output = DenoiseOutput {
            eps: self.eps(z)?,
            features: BTreeMap::new(),
            self_attn: BTreeMap::new(),
            cross_attn,
        };
        Ok(AttentionGradient {
            value,
            grad: Latent::from_rows(self.shape, &gz)?,
            output,
        })
    }
}
