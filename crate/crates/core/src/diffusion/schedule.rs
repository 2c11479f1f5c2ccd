use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const DEFAULT_STEPS: usize = 50;

const COSINE_OFFSET: f64 = 0.008;
const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

/// Noise levels for `T` diffusion steps. Index 0 of `alpha_bar` is the clean
/// endpoint (ᾱ₀ = 1); `alpha[t - 1]` is α_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// α_t for `1 ≤ t ≤ T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// ᾱ_t for `0 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bar
    }
}

/// Continuous cosine curve f(t)/f(0) with f(t) = cos²(((t/T) + s)/(1 + s) · π/2).
pub fn cosine_alpha_bar(t: usize, steps: usize) -> f64 {
    let f = |u: f64| {
        let c = ((u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * FRAC_PI_2).cos();
        c * c
    };
    f(t as f64 / steps as f64) / f(0.0)
}

/// Build a schedule. The linear β range (1e-4 to 0.02 at 1000 steps) is
/// rescaled by `1000 / T` so short schedules still end near pure noise.
pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if steps < 1 {
        return Err(invalid("schedule needs at least one step"));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::Linear => {
            let scale = 1000.0 / steps as f64;
            let (lo, hi) = (1e-4 * scale, 0.02 * scale);
            (0..steps)
                .map(|i| {
                    let b = if steps == 1 {
                        lo
                    } else {
                        lo + (hi - lo) * i as f64 / (steps - 1) as f64
                    };
                    b.min(MAX_BETA)
                })
                .collect()
        }
        ScheduleKind::Cosine => (1..=steps)
            .map(|t| {
                let b = 1.0 - cosine_alpha_bar(t, steps) / cosine_alpha_bar(t - 1, steps);
                b.clamp(0.0, MAX_BETA)
            })
            .collect(),
    };
    let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bar = Vec::with_capacity(steps + 1);
    alpha_bar.push(1.0);
    let mut acc = 1.0;
    for a in &alpha {
        acc *= a;
        alpha_bar.push(acc);
    }
    if alpha.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(invalid("schedule produced α outside (0, 1)"));
    }
    Ok(NoiseSchedule {
        kind,
        alpha,
        alpha_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_steps() {
        assert!(make_schedule(0, ScheduleKind::Linear).is_err());
    }

    #[test]
    fn single_step_linear() {
        let s = make_schedule(1, ScheduleKind::Linear).unwrap();
        assert_eq!(s.steps(), 1);
        assert!(s.alpha(1) > 0.0 && s.alpha(1) < 1.0);
        assert_eq!(s.alpha_bar(1), s.alpha(1));
        assert_eq!(s.alpha_bar(0), 1.0);
    }

    #[test]
    fn linear_fifty_steps_ends_near_noise() {
        let s = make_schedule(DEFAULT_STEPS, ScheduleKind::Linear).unwrap();
        // independent product of α_t
        let mut prod = 1.0;
        for t in 1..=50 {
            prod *= s.alpha(t);
            assert!((s.alpha_bar(t) - prod).abs() < 1e-15);
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        assert!(s.alpha_bar(50) < 0.01, "{}", s.alpha_bar(50));
    }

    #[test]
    fn cosine_matches_closed_form() {
        let steps = 50;
        let s = make_schedule(steps, ScheduleKind::Cosine).unwrap();
        for t in 0..steps {
            let u = (t as f64 / steps as f64 + 0.008) / 1.008 * core::f64::consts::PI / 2.0;
            let u0 = 0.008 / 1.008 * core::f64::consts::PI / 2.0;
            let expect = (u.cos() * u.cos()) / (u0.cos() * u0.cos());
            assert!((s.alpha_bar(t) - expect).abs() < 1e-6, "t={t}");
        }
        for t in 1..=steps {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.alpha(t) > 0.0 && s.alpha(t) < 1.0);
        }
    }
}
