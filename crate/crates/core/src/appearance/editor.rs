use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::energy::{LatentMask, MaskEnergy};
use crate::diffusion::{
    ddim_invert, ddim_step, decode, encode, structure_map, Conditioning, Denoiser, NoiseSchedule,
    Overrides, FEATURE_UP, SELF_ATTN_MID,
};
use crate::error::{invalid, shape_err, Error, Result};
use crate::prompt::{EditRequest, Vocabulary};
use crate::scenes::{BinaryMask, Image, SegLabel};
use crate::tensor::{Latent, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditConfig {
    pub steps: usize,
    pub theta_f: f64,
    pub theta_a: f64,
    pub gamma: f64,
    pub eta: f64,
    pub max_guidance_iters: usize,
    /// Cross-attention layer for the energy; `None` uses the denoiser's default.
    pub guidance_layer: Option<String>,
    pub feature_block: String,
    pub self_attn_layer: String,
    /// Keep the start token in the energy's denominator.
    pub include_special_tokens: bool,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            theta_f: 0.8,
            theta_a: 0.5,
            gamma: 0.2,
            eta: 1.0,
            max_guidance_iters: 10,
            guidance_layer: None,
            feature_block: FEATURE_UP.to_string(),
            self_attn_layer: SELF_ATTN_MID.to_string(),
            include_special_tokens: true,
        }
    }
}

impl EditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("edit needs at least one step"));
        }
        if !(0.0..=1.0).contains(&self.theta_f) || !(0.0..=1.0).contains(&self.theta_a) {
            return Err(invalid("injection fractions must lie in [0, 1]"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("loss threshold must be positive"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(invalid("guidance scale must be finite and non-negative"));
        }
        if self.max_guidance_iters == 0 {
            return Err(invalid("max_guidance_iters must be at least 1"));
        }
        Ok(())
    }

    /// Number of leading denoising steps that receive injected tensors.
    pub fn injected_steps(theta: f64, steps: usize) -> usize {
        (theta * steps as f64).floor() as usize
    }
}

/// True when denoising step `step` (1-based from the noisy end; 0 is the
/// initial state) falls in the first `floor(θ·T)` steps.
pub fn inject_at(step: usize, theta: f64, steps: usize) -> bool {
    step <= EditConfig::injected_steps(theta, steps)
}

fn pick(recon: &Mat, edit: &Mat, inject: bool) -> Result<Mat> {
    if !recon.same_shape(edit) {
        return Err(shape_err(format!(
            "recon {}×{} vs edit {}×{}",
            recon.rows, recon.cols, edit.rows, edit.cols
        )));
    }
    Ok(if inject { recon.clone() } else { edit.clone() })
}

/// Eq.-3 feature choice for the edit branch at denoising step `step`.
pub fn inject_features(
    f_recon: &Mat,
    f_edit: &Mat,
    step: usize,
    config: &EditConfig,
) -> Result<Mat> {
    pick(
        f_recon,
        f_edit,
        inject_at(step, config.theta_f, config.steps),
    )
}

/// Eq.-4 self-attention choice for the edit branch at denoising step `step`.
pub fn inject_self_attention(
    a_recon: &Mat,
    a_edit: &Mat,
    step: usize,
    config: &EditConfig,
) -> Result<Mat> {
    pick(
        a_recon,
        a_edit,
        inject_at(step, config.theta_a, config.steps),
    )
}

/// `M ⊙ z_edit + (1 − M) ⊙ z_recon`, with the mask broadcast over channels.
/// Cells with `M = 1` or `M = 0` copy the corresponding branch exactly.
pub fn blend_latents(z_edit: &Latent, z_recon: &Latent, mask: &[f64]) -> Result<Latent> {
    z_edit.check_same_shape(z_recon)?;
    let n = z_edit.shape.positions();
    if mask.len() != n {
        return Err(shape_err(format!(
            "mask has {} cells, latent {}",
            mask.len(),
            n
        )));
    }
    let data = z_edit
        .data
        .iter()
        .zip(&z_recon.data)
        .enumerate()
        .map(|(i, (&e, &r))| {
            let m = mask[i % n];
            if m == 1.0 {
                e
            } else if m == 0.0 {
                r
            } else {
                r + m * (e - r)
            }
        })
        .collect();
    Ok(Latent {
        shape: z_edit.shape,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceStep {
    pub step: usize,
    pub t: usize,
    pub loss: f64,
    pub guidance_iters: usize,
}

/// Running record of the guidance loop across an edit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GuidanceState {
    /// Energy after the most recent loop.
    pub loss: f64,
    /// Updates applied in the most recent loop.
    pub iterations: usize,
    pub log: Vec<GuidanceStep>,
}

/// Gradient descent on the mask energy until it falls to `gamma` or the
/// iteration cap is reached. Returns the updated latent, the final energy
/// and the number of updates applied.
#[allow(clippy::too_many_arguments)]
pub fn guided_update(
    z: &Latent,
    t: usize,
    denoiser: &dyn Denoiser,
    cond: &Conditioning<'_>,
    edit_columns: &[usize],
    mask: &LatentMask,
    config: &EditConfig,
) -> Result<(Latent, f64, usize)> {
    if !z.is_finite() {
        return Err(Error::NonFinite { step: t });
    }
    let layer = config
        .guidance_layer
        .clone()
        .unwrap_or_else(|| denoiser.guidance_layer().to_string());
    let energy = MaskEnergy {
        edit_columns,
        mask,
        include_special: config.include_special_tokens,
    };
    let mut z = z.clone();
    let mut iters = 0;
    loop {
        let g = denoiser.attention_gradient(&z, t, cond, &layer, &energy)?;
        if g.value <= config.gamma || iters == config.max_guidance_iters {
            if config.eta == 0.0 && iters > 0 {
                log::warn!("guidance at t={t} made no progress: eta is zero");
            }
            return Ok((z, g.value, iters));
        }
        if !g.grad.is_finite() {
            return Err(Error::NonFiniteGradient {
                step: t,
                iteration: iters,
            });
        }
        for (v, d) in z.data.iter_mut().zip(&g.grad.data) {
            *v -= config.eta * d;
        }
        iters += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditLog {
    pub sample_id: String,
    pub attribute: String,
    #[serde(rename = "P")]
    pub source: String,
    #[serde(rename = "P*")]
    pub target: String,
    #[serde(rename = "S'")]
    pub edit_indices: Vec<usize>,
    pub steps: Vec<GuidanceStep>,
    pub converged: bool,
    pub feature_injection_steps: usize,
    pub self_attn_injection_steps: usize,
}

#[derive(Debug, Clone)]
pub struct AppearanceEdit {
    pub image: Image,
    pub latent: Latent,
    /// Output of the reconstruction branch.
    pub reconstruction: Latent,
    pub state: GuidanceState,
    pub log: EditLog,
}

/// Run both branches from the shared inverted noise: guidance on the edit
/// latent (local edits), denoising with feature and self-attention
/// injection from the reconstruction branch, then per-step blending.
#[allow(clippy::too_many_arguments)]
pub fn edit_appearance(
    image: &Image,
    label: &SegLabel,
    mask: &BinaryMask,
    request: &EditRequest,
    denoiser: &dyn Denoiser,
    vocab: &Vocabulary,
    schedule: &NoiseSchedule,
    config: &EditConfig,
) -> Result<AppearanceEdit> {
    config.validate()?;
    if schedule.steps() != config.steps {
        return Err(invalid(format!(
            "schedule has {} steps, config {}",
            schedule.steps(),
            config.steps
        )));
    }
    label.check_same_size(image)?;
    if !image.same_size(mask) {
        return Err(shape_err("mask and image sizes differ"));
    }
    let steps = config.steps;
    let local = request.kind.is_local();
    let guided = local && !request.edit_indices.is_empty();

    let z0 = encode(image)?;
    let structure = structure_map(label)?;
    let src_ids = vocab.encode(&request.source_tokens);
    let tgt_ids = vocab.encode(&request.target_tokens);
    let cond_src = Conditioning {
        tokens: &src_ids,
        structure: Some(&structure),
    };
    let cond_tgt = Conditioning {
        tokens: &tgt_ids,
        structure: Some(&structure),
    };
    let lmask = if local {
        Some(LatentMask::from_pixels(mask)?)
    } else {
        None
    };
    let edit_columns: Vec<usize> = request.edit_indices.iter().map(|i| i + 1).collect();

    let traj = ddim_invert(&z0, denoiser, &cond_src, schedule)?;
    let mut z_rec = traj[steps].clone();
    let mut z_edit = z_rec.clone();
    let mut state = GuidanceState::default();
    let mut converged = true;

    for step in 1..=steps {
        let t = steps - step + 1;
        if guided {
            let m = lmask.as_ref().expect("local edit mask");
            let (z, loss, iters) =
                guided_update(&z_edit, t, denoiser, &cond_tgt, &edit_columns, m, config)?;
            z_edit = z;
            converged &= loss <= config.gamma;
            state.loss = loss;
            state.iterations = iters;
            state.log.push(GuidanceStep {
                step,
                t,
                loss,
                guidance_iters: iters,
            });
        }
        let out_rec = denoiser.denoise(&z_rec, t, &cond_src, None)?;
        let mut overrides = Overrides::default();
        if inject_at(step, config.theta_f, steps) {
            if let Some(f) = out_rec.features.get(&config.feature_block) {
                overrides
                    .features
                    .insert(config.feature_block.clone(), f.clone());
            }
        }
        if inject_at(step, config.theta_a, steps) {
            if let Some(a) = out_rec.self_attn.get(&config.self_attn_layer) {
                overrides
                    .self_attn
                    .insert(config.self_attn_layer.clone(), a.clone());
            }
        }
        let out_edit = denoiser.denoise(&z_edit, t, &cond_tgt, Some(&overrides))?;
        z_rec = ddim_step(&z_rec, &out_rec.eps, t, schedule)?;
        z_edit = ddim_step(&z_edit, &out_edit.eps, t, schedule)?;
        if let Some(m) = &lmask {
            z_edit = blend_latents(&z_edit, &z_rec, &m.values)?;
        }
        if !z_edit.is_finite() || !z_rec.is_finite() {
            return Err(Error::NonFinite { step: t - 1 });
        }
    }

    let edited = decode(&z_edit, image.height, image.width)?;
    let log = EditLog {
        sample_id: String::new(),
        attribute: request.kind.name().to_string(),
        source: request.source.clone(),
        target: request.target.clone(),
        edit_indices: request.edit_indices.clone(),
        steps: state.log.clone(),
        converged,
        feature_injection_steps: EditConfig::injected_steps(config.theta_f, steps),
        self_attn_injection_steps: EditConfig::injected_steps(config.theta_a, steps),
    };
    Ok(AppearanceEdit {
        image: edited,
        latent: z_edit,
        reconstruction: z_rec,
        state,
        log,
    })
}

/// Plain DDIM reconstruction (invert then sample) with the source prompt and
/// structure condition; the reference every appearance edit is compared to.
pub fn reconstruct(
    image: &Image,
    label: &SegLabel,
    caption_tokens: &[String],
    denoiser: &dyn Denoiser,
    vocab: &Vocabulary,
    schedule: &NoiseSchedule,
) -> Result<(Image, Latent)> {
    let z0 = encode(image)?;
    let structure = structure_map(label)?;
    let ids = vocab.encode(caption_tokens);
    let cond = Conditioning {
        tokens: &ids,
        structure: Some(&structure),
    };
    let traj = ddim_invert(&z0, denoiser, &cond, schedule)?;
    let z = crate::diffusion::ddim_sample(&traj[schedule.steps()], denoiser, &cond, schedule)?;
    Ok((decode(&z, image.height, image.width)?, z))
}
