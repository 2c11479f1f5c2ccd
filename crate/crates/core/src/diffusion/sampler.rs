use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;

use super::denoiser::{Conditioning, Denoiser};
use super::schedule::NoiseSchedule;
use crate::error::{invalid, Error, Result};
use crate::tensor::Latent;

/// A latent together with its position on the diffusion-time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub z: Latent,
    pub t: usize,
}

impl LatentState {
    pub fn new(z: Latent, t: usize, schedule: &NoiseSchedule) -> Result<Self> {
        if t > schedule.steps() {
            return Err(invalid(format!(
                "timestep {t} beyond schedule length {}",
                schedule.steps()
            )));
        }
        if !z.is_finite() {
            return Err(Error::NonFinite { step: t });
        }
        Ok(Self { z, t })
    }
}

fn check_t(t: usize, schedule: &NoiseSchedule, allow_zero: bool) -> Result<()> {
    if (t == 0 && !allow_zero) || t > schedule.steps() {
        return Err(invalid(format!(
            "timestep {t} outside 1..={}",
            schedule.steps()
        )));
    }
    Ok(())
}

/// Closed-form noising `sqrt(ᾱ_t)·z0 + sqrt(1 − ᾱ_t)·noise`; `t = 0` returns `z0`.
pub fn forward_diffuse(
    z0: &Latent,
    t: usize,
    noise: &Latent,
    schedule: &NoiseSchedule,
) -> Result<Latent> {
    z0.check_same_shape(noise)?;
    check_t(t, schedule, true)?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = z0
        .data
        .iter()
        .zip(&noise.data)
        .map(|(z, n)| a * z + b * n)
        .collect();
    Ok(Latent {
        shape: z0.shape,
        data,
    })
}

/// Clean-sample estimate `(z_t − sqrt(1 − ᾱ_t)·eps) / sqrt(ᾱ_t)`.
pub fn predict_x0(
    z_t: &Latent,
    eps: &Latent,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Latent> {
    z_t.check_same_shape(eps)?;
    check_t(t, schedule, false)?;
    let ab = schedule.alpha_bar(t);
    let (s, n) = (ab.sqrt(), (1.0 - ab).sqrt());
    let data = z_t
        .data
        .iter()
        .zip(&eps.data)
        .map(|(z, e)| (z - n * e) / s)
        .collect();
    Ok(Latent {
        shape: z_t.shape,
        data,
    })
}

/// Deterministic DDIM update from `t` to `t − 1`.
pub fn ddim_step(z_t: &Latent, eps: &Latent, t: usize, schedule: &NoiseSchedule) -> Result<Latent> {
    let x0 = predict_x0(z_t, eps, t, schedule)?;
    let prev = schedule.alpha_bar(t - 1);
    let (s, n) = (prev.sqrt(), (1.0 - prev).sqrt());
    let data = x0
        .data
        .iter()
        .zip(&eps.data)
        .map(|(x, e)| s * x + n * e)
        .collect();
    Ok(Latent {
        shape: z_t.shape,
        data,
    })
}

/// One inversion step from `t − 1` to `t` using noise predicted at `z_{t−1}`.
pub fn ddim_invert_step(
    z_prev: &Latent,
    eps: &Latent,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<Latent> {
    z_prev.check_same_shape(eps)?;
    check_t(t, schedule, false)?;
    let (ab, prev) = (schedule.alpha_bar(t), schedule.alpha_bar(t - 1));
    let a = (ab / prev).sqrt();
    let b = ab.sqrt() * ((1.0 / ab - 1.0).sqrt() - (1.0 / prev - 1.0).sqrt());
    let data = z_prev
        .data
        .iter()
        .zip(&eps.data)
        .map(|(z, e)| a * z + b * e)
        .collect();
    Ok(Latent {
        shape: z_prev.shape,
        data,
    })
}

/// Invert `z0` into the trajectory `[z_0, …, z_T]`.
pub fn ddim_invert(
    z0: &Latent,
    denoiser: &dyn Denoiser,
    cond: &Conditioning<'_>,
    schedule: &NoiseSchedule,
) -> Result<Vec<Latent>> {
    if z0.shape != denoiser.latent_shape() {
        return Err(invalid("latent shape does not match the denoiser"));
    }
    let mut traj = Vec::with_capacity(schedule.steps() + 1);
    traj.push(z0.clone());
    for t in 1..=schedule.steps() {
        let prev = &traj[t - 1];
        let eps = denoiser.denoise(prev, t, cond, None)?.eps;
        let next = ddim_invert_step(prev, &eps, t, schedule)?;
        if !next.is_finite() {
            return Err(Error::NonFinite { step: t });
        }
        traj.push(next);
    }
    Ok(traj)
}

/// Deterministic sampling from `z_T` down to `z_0`.
pub fn ddim_sample(
    z_t: &Latent,
    denoiser: &dyn Denoiser,
    cond: &Conditioning<'_>,
    schedule: &NoiseSchedule,
) -> Result<Latent> {
    let mut z = z_t.clone();
    for t in (1..=schedule.steps()).rev() {
        let eps = denoiser.denoise(&z, t, cond, None)?.eps;
        z = ddim_step(&z, &eps, t, schedule)?;
        if !z.is_finite() {
            return Err(Error::NonFinite { step: t - 1 });
        }
    }
    Ok(z)
}
