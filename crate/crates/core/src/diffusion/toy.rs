//! Small conditional denoiser standing in for a pretrained latent diffusion
//! U-Net. Every latent cell is one token of width `d`:
//!
//! ```text
//! h0     = conv3x3(z) + pos + time(t) + structure·Wc      (structure branch)
//! down0  = h0 + mlp(h0)
//! mid    = down0 + selfattn(down0)                        (self-attn "mid")
//! up0    = mid + mlp(mid) + structure·Wu                  (feature "up0")
//! h2     = up0 + crossattn(up0, tokens)                   (cross-attn "up0")
//! eps    = conv3x3(silu(h2 + h0))
//! ```

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::denoiser::{
    AttentionGradient, AttentionObjective, Conditioning, CrossAttention, DenoiseOutput, Denoiser,
    Overrides,
};
use crate::autodiff::{Tape, Var};
use crate::error::{invalid, shape_err, Result};
use crate::tensor::{Latent, LatentShape, Mat};

pub const FEATURE_DOWN: &str = "down0";
pub const FEATURE_UP: &str = "up0";
pub const SELF_ATTN_MID: &str = "mid";
pub const CROSS_ATTN_UP: &str = "up0";

const TIME_FREQS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub latent: LatentShape,
    pub width: usize,
    pub mlp: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub num_classes: usize,
    pub vocab_size: usize,
    /// Schedule length the time embedding is normalized by.
    pub steps: usize,
    pub seed: u64,
}

impl ToyConfig {
    pub fn new(latent: LatentShape, num_classes: usize, vocab_size: usize) -> Self {
        Self {
            latent,
            width: 32,
            mlp: 64,
            heads: 2,
            head_dim: 16,
            num_classes,
            vocab_size,
            steps: 50,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent.is_empty()
            || self.width == 0
            || self.mlp == 0
            || self.heads == 0
            || self.head_dim == 0
        {
            return Err(invalid("toy denoiser dimensions must be positive"));
        }
        if self.vocab_size == 0 || self.num_classes == 0 || self.steps == 0 {
            return Err(invalid(
                "toy denoiser needs a vocabulary, classes and steps",
            ));
        }
        Ok(())
    }

    /// Names and shapes of every parameter tensor.
    pub fn param_shapes(&self) -> Vec<(String, usize, usize)> {
        let (c, d, m, k) = (self.latent.channels, self.width, self.mlp, self.num_classes);
        let hd = self.heads * self.head_dim;
        let mut v: Vec<(String, usize, usize)> = Vec::new();
        for i in 0..9 {
            v.push((format!("in.w{i}"), c, d));
            v.push((format!("out.w{i}"), d, c));
        }
        let fixed: [(&str, usize, usize); 24] = [
            ("in.b", 1, d),
            ("pos", self.latent.positions(), d),
            ("time.w", 2 * TIME_FREQS, d),
            ("time.b", 1, d),
            ("ctrl.in", k, d),
            ("ctrl.up", k, d),
            ("down.w1", d, m),
            ("down.b1", 1, m),
            ("down.w2", m, d),
            ("down.b2", 1, d),
            ("mid.q", d, d),
            ("mid.k", d, d),
            ("mid.v", d, d),
            ("mid.o", d, d),
            ("up.w1", d, m),
            ("up.b1", 1, m),
            ("up.w2", m, d),
            ("up.b2", 1, d),
            ("tok", self.vocab_size, d),
            ("xattn.q", d, hd),
            ("xattn.k", d, hd),
            ("xattn.v", d, hd),
            ("xattn.o", hd, d),
            ("out.b", 1, c),
        ];
        v.extend(fixed.iter().map(|&(n, r, cc)| (n.to_string(), r, cc)));
        v.sort();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiser {
    config: ToyConfig,
    params: BTreeMap<String, Mat>,
}

pub(crate) struct ForwardVars {
    pub eps: Var,
    pub down: Var,
    pub up: Var,
    pub self_attn: Var,
    pub cross: Vec<Var>,
}

fn init_std(name: &str, rows: usize) -> f64 {
    match name {
        n if n.ends_with(".b") || n.starts_with("down.b") || n.starts_with("up.b") => 0.0,
        n if n.starts_with("out.w") => 0.1 / (9.0 * rows as f64).sqrt(),
        n if n.starts_with("in.w") => 1.0 / (9.0 * rows as f64).sqrt(),
        "pos" => 0.1,
        "tok" => 1.0,
        "mid.o" | "xattn.o" | "down.w2" | "up.w2" => 0.5 / (rows as f64).sqrt(),
        _ => 1.0 / (rows as f64).sqrt(),
    }
}

impl ToyDenoiser {
    /// Freshly initialized weights drawn from `config.seed`.
    pub fn init(config: ToyConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = BTreeMap::new();
        for (name, rows, cols) in config.param_shapes() {
            let std = init_std(&name, rows);
            let m = Mat::from_fn(rows, cols, |_, _| {
                let n: f64 = StandardNormal.sample(&mut rng);
                n * std
            });
            params.insert(name, m);
        }
        Ok(Self { config, params })
    }

    /// Rebuild from stored tensors; names and shapes must match the config.
    pub fn from_params(config: ToyConfig, params: BTreeMap<String, Mat>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != params.len() {
            return Err(shape_err(format!(
                "expected {} tensors, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for (name, rows, cols) in shapes {
            match params.get(&name) {
                Some(m) if m.rows == rows && m.cols == cols && m.is_finite() => {}
                Some(m) => {
                    return Err(shape_err(format!(
                        "tensor {name} is {}×{}, expected {rows}×{cols}",
                        m.rows, m.cols
                    )))
                }
                None => return Err(shape_err(format!("missing tensor {name}"))),
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn params(&self) -> &BTreeMap<String, Mat> {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut BTreeMap<String, Mat> {
        &mut self.params
    }

    /// Copy of this model with the structure branch disabled.
    pub fn without_structure_branch(&self) -> Self {
        let mut out = self.clone();
        for name in ["ctrl.in", "ctrl.up"] {
            let m = out.params.get_mut(name).expect("structure weights");
            m.data.iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params.values().map(|m| m.data.len()).sum()
    }

    pub(crate) fn load(&self, tape: &mut Tape, trainable: bool) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(k, m)| {
                (
                    k.clone(),
                    if trainable {
                        tape.variable(m.clone())
                    } else {
                        tape.constant(m.clone())
                    },
                )
            })
            .collect()
    }

    fn time_features(&self, t: usize) -> Mat {
        let tau = t as f64 / self.config.steps as f64;
        let mut m = Mat::zeros(1, 2 * TIME_FREQS);
        for k in 0..TIME_FREQS {
            let w = PI * (1u32 << k) as f64 * tau;
            m.data[2 * k] = w.sin();
            m.data[2 * k + 1] = w.cos();
        }
        m
    }

    fn check_inputs(
        &self,
        z: &Latent,
        cond: &Conditioning<'_>,
        overrides: Option<&Overrides>,
    ) -> Result<()> {
        let cfg = &self.config;
        if z.shape != cfg.latent {
            return Err(shape_err(format!(
                "latent {:?} vs denoiser {:?}",
                z.shape, cfg.latent
            )));
        }
        if cond.tokens.is_empty() {
            return Err(invalid("empty token sequence"));
        }
        if let Some(&bad) = cond.tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
            return Err(invalid(format!(
                "token id {bad} outside vocabulary of {}",
                cfg.vocab_size
            )));
        }
        if let Some(s) = cond.structure {
            if s.rows != cfg.latent.positions() || s.cols != cfg.num_classes {
                return Err(shape_err(format!("structure map {}×{}", s.rows, s.cols)));
            }
        }
        if let Some(o) = overrides {
            let (p, d) = (cfg.latent.positions(), cfg.width);
            for (name, m) in &o.features {
                if name != FEATURE_UP && name != FEATURE_DOWN {
                    return Err(invalid(format!("unknown feature block {name:?}")));
                }
                if m.rows != p || m.cols != d {
                    return Err(shape_err(format!(
                        "feature override {name} is {}×{}",
                        m.rows, m.cols
                    )));
                }
            }
            for (name, m) in &o.self_attn {
                if name != SELF_ATTN_MID {
                    return Err(invalid(format!("unknown self-attention layer {name:?}")));
                }
                if m.rows != p || m.cols != p {
                    return Err(shape_err(format!(
                        "self-attention override is {}×{}",
                        m.rows, m.cols
                    )));
                }
            }
        }
        Ok(())
    }

    fn conv3x3(&self, tape: &mut Tape, x: Var, pv: &BTreeMap<String, Var>, prefix: &str) -> Var {
        let (h, w) = (self.config.latent.height, self.config.latent.width);
        let mut acc: Option<Var> = None;
        let mut i = 0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let shifted = if dy == 0 && dx == 0 {
                    x
                } else {
                    tape.shift(x, dy, dx, h, w)
                };
                let term = tape.matmul(shifted, pv[&format!("{prefix}.w{i}")]);
                acc = Some(match acc {
                    Some(a) => tape.add(a, term),
                    None => term,
                });
                i += 1;
            }
        }
        let acc = acc.expect("nine taps");
        tape.add_row(acc, pv[&format!("{prefix}.b")])
    }

    fn mlp(&self, tape: &mut Tape, x: Var, pv: &BTreeMap<String, Var>, prefix: &str) -> Var {
        let h = tape.matmul(x, pv[&format!("{prefix}.w1")]);
        let h = tape.add_row(h, pv[&format!("{prefix}.b1")]);
        let h = tape.silu(h);
        let h = tape.matmul(h, pv[&format!("{prefix}.w2")]);
        tape.add_row(h, pv[&format!("{prefix}.b2")])
    }

    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        pv: &BTreeMap<String, Var>,
        z: Var,
        t: usize,
        cond: &Conditioning<'_>,
        overrides: Option<&Overrides>,
    ) -> ForwardVars {
        let cfg = &self.config;
        let d = cfg.width;

        let x = self.conv3x3(tape, z, pv, "in");
        let x = tape.add(x, pv["pos"]);
        let tf = tape.constant(self.time_features(t));
        let temb = tape.matmul(tf, pv["time.w"]);
        let temb = tape.add_row(temb, pv["time.b"]);
        let mut h0 = tape.add_row(x, temb);
        let structure = cond.structure.map(|s| tape.constant(s.clone()));
        if let Some(s) = structure {
            let c = tape.matmul(s, pv["ctrl.in"]);
            h0 = tape.add(h0, c);
        }

        let m = self.mlp(tape, h0, pv, "down");
        let mut down = tape.add(h0, m);
        if let Some(f) = overrides.and_then(|o| o.features.get(FEATURE_DOWN)) {
            down = tape.constant(f.clone());
        }

        let q = tape.matmul(down, pv["mid.q"]);
        let k = tape.matmul(down, pv["mid.k"]);
        let v = tape.matmul(down, pv["mid.v"]);
        let self_attn = match overrides.and_then(|o| o.self_attn.get(SELF_ATTN_MID)) {
            Some(a) => tape.constant(a.clone()),
            None => {
                let s = tape.matmul_nt(q, k);
                let s = tape.scale(s, 1.0 / (d as f64).sqrt());
                tape.softmax_rows(s)
            }
        };
        let o = tape.matmul(self_attn, v);
        let o = tape.matmul(o, pv["mid.o"]);
        let mid = tape.add(down, o);

        let m = self.mlp(tape, mid, pv, "up");
        let mut up = tape.add(mid, m);
        if let Some(s) = structure {
            let c = tape.matmul(s, pv["ctrl.up"]);
            up = tape.add(up, c);
        }
        if let Some(f) = overrides.and_then(|o| o.features.get(FEATURE_UP)) {
            up = tape.constant(f.clone());
        }

        let mut onehot = Mat::zeros(cond.tokens.len(), cfg.vocab_size);
        for (i, &tok) in cond.tokens.iter().enumerate() {
            onehot.set(i, tok as usize, 1.0);
        }
        let onehot = tape.constant(onehot);
        let emb = tape.matmul(onehot, pv["tok"]);
        let q = tape.matmul(up, pv["xattn.q"]);
        let k = tape.matmul(emb, pv["xattn.k"]);
        let v = tape.matmul(emb, pv["xattn.v"]);
        let scale = 1.0 / (cfg.head_dim as f64).sqrt();
        let mut cross = Vec::with_capacity(cfg.heads);
        let mut outs = Vec::with_capacity(cfg.heads);
        for head in 0..cfg.heads {
            let start = head * cfg.head_dim;
            let qh = tape.slice_cols(q, start, cfg.head_dim);
            let kh = tape.slice_cols(k, start, cfg.head_dim);
            let vh = tape.slice_cols(v, start, cfg.head_dim);
            let s = tape.matmul_nt(qh, kh);
            let s = tape.scale(s, scale);
            let a = tape.softmax_rows(s);
            cross.push(a);
            outs.push(tape.matmul(a, vh));
        }
        let o = if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat_cols(&outs)
        };
        let o = tape.matmul(o, pv["xattn.o"]);
        let h2 = tape.add(up, o);

        let y = tape.add(h2, h0);
        let y = tape.silu(y);
        let eps = self.conv3x3(tape, y, pv, "out");
        ForwardVars {
            eps,
            down,
            up,
            self_attn,
            cross,
        }
    }

    fn collect(&self, tape: &Tape, fv: &ForwardVars) -> Result<DenoiseOutput> {
        let shape = self.config.latent;
        let eps = Latent::from_rows(shape, tape.value(fv.eps))?;
        let mut features = BTreeMap::new();
        features.insert(FEATURE_DOWN.to_string(), tape.value(fv.down).clone());
        features.insert(FEATURE_UP.to_string(), tape.value(fv.up).clone());
        let mut self_attn = BTreeMap::new();
        self_attn.insert(SELF_ATTN_MID.to_string(), tape.value(fv.self_attn).clone());
        let heads: Vec<Mat> = fv.cross.iter().map(|&v| tape.value(v).clone()).collect();
        let mut cross_attn = BTreeMap::new();
        cross_attn.insert(
            CROSS_ATTN_UP.to_string(),
            CrossAttention::from_heads(shape.height, shape.width, &heads)?,
        );
        Ok(DenoiseOutput {
            eps,
            features,
            self_attn,
            cross_attn,
        })
    }
}

impl Denoiser for ToyDenoiser {
    fn latent_shape(&self) -> LatentShape {
        self.config.latent
    }

    fn guidance_layer(&self) -> &str {
        CROSS_ATTN_UP
    }

    fn denoise(
        &self,
        z: &Latent,
        t: usize,
        cond: &Conditioning<'_>,
        overrides: Option<&Overrides>,
    ) -> Result<DenoiseOutput> {
        self.check_inputs(z, cond, overrides)?;
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, false);
        let zv = tape.constant(z.to_rows());
        let fv = self.forward(&mut tape, &pv, zv, t, cond, overrides);
        self.collect(&tape, &fv)
    }

    fn attention_gradient(
        &self,
        z: &Latent,
        t: usize,
        cond: &Conditioning<'_>,
        layer: &str,
        objective: &dyn AttentionObjective,
    ) -> Result<AttentionGradient> {
        self.check_inputs(z, cond, None)?;
        if layer != CROSS_ATTN_UP {
            return Err(invalid(format!("unknown attention layer {layer:?}")));
        }
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, false);
        let zv = tape.variable(z.to_rows());
        let fv = self.forward(&mut tape, &pv, zv, t, cond, None);
        let output = self.collect(&tape, &fv)?;
        let (value, g) = objective.value_and_grad(&output.cross_attn[CROSS_ATTN_UP])?;
        let seeds: Vec<Mat> = (0..g.heads).map(|h| g.head(h)).collect();
        let pairs: Vec<(Var, &Mat)> = fv.cross.iter().copied().zip(seeds.iter()).collect();
        let mut grads = tape.backward(&pairs);
        let shape = self.config.latent;
        let gz = grads
            .take(zv)
            .unwrap_or_else(|| Mat::zeros(shape.positions(), shape.channels));
        Ok(AttentionGradient {
            value,
            grad: Latent::from_rows(shape, &gz)?,
            output,
        })
    }
}

/// Per-sample squared-error of the noise prediction, exposed for training.
pub(crate) fn eps_loss_seed(pred: &Mat, target: &Latent, weight: f64) -> (f64, Mat) {
    let target = target.to_rows();
    let mut seed = Mat::zeros(pred.rows, pred.cols);
    let mut loss = 0.0;
    for i in 0..pred.data.len() {
        let d = pred.data[i] - target.data[i];
        loss += d * d;
        seed.data[i] = 2.0 * d * weight;
    }
    (loss, seed)
}
