use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::denoiser::{Conditioning, Denoiser};
use super::latent::{encode, structure_map};
use super::sampler::forward_diffuse;
use super::schedule::NoiseSchedule;
use super::toy::{eps_loss_seed, ToyConfig, ToyDenoiser};
use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::scenes::{Image, SegLabel};
use crate::tensor::{Latent, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub latent: Latent,
    pub tokens: Vec<u32>,
    pub structure: Option<Mat>,
}

impl TrainingExample {
    pub fn from_scene(image: &Image, tokens: Vec<u32>, label: &SegLabel) -> Result<Self> {
        Ok(Self {
            latent: encode(image)?,
            tokens,
            structure: Some(structure_map(label)?),
        })
    }

    fn cond(&self) -> Conditioning<'_> {
        Conditioning {
            tokens: &self.tokens,
            structure: self.structure.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 600,
            batch_size: 8,
            learning_rate: 3e-3,
            grad_clip: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-element loss of each optimization step.
    pub losses: Vec<f64>,
}

struct Adam {
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
    step: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(params: &BTreeMap<String, Mat>) -> Self {
        let zeros = |m: &Mat| alloc::vec![0.0; m.data.len()];
        Self {
            m: params.iter().map(|(k, m)| (k.clone(), zeros(m))).collect(),
            v: params.iter().map(|(k, m)| (k.clone(), zeros(m))).collect(),
            step: 0,
        }
    }

    fn update(
        &mut self,
        params: &mut BTreeMap<String, Mat>,
        grads: &BTreeMap<String, Mat>,
        lr: f64,
    ) {
        self.step += 1;
        let c1 = 1.0 - Self::B1.powi(self.step);
        let c2 = 1.0 - Self::B2.powi(self.step);
        for (name, p) in params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            let m = self.m.get_mut(name).expect("moment");
            let v = self.v.get_mut(name).expect("moment");
            for i in 0..p.data.len() {
                m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g.data[i];
                v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g.data[i] * g.data[i];
                p.data[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

/// Fit a [`ToyDenoiser`] with the standard noise-prediction objective.
/// Zero steps returns the seeded initialization unchanged.
pub fn train_toy_denoiser(
    config: ToyConfig,
    data: &[TrainingExample],
    schedule: &NoiseSchedule,
    options: &TrainOptions,
) -> Result<(ToyDenoiser, TrainReport)> {
    if config.steps != schedule.steps() {
        return Err(invalid(
            "denoiser time embedding and schedule disagree on the step count",
        ));
    }
    let mut model = ToyDenoiser::init(config)?;
    let mut report = TrainReport::default();
    if options.steps == 0 {
        return Ok((model, report));
    }
    if data.is_empty() || options.batch_size == 0 {
        return Err(invalid("training needs data and a positive batch size"));
    }
    let shape = model.config().latent;
    if let Some(bad) = data.iter().find(|e| e.latent.shape != shape) {
        return Err(invalid(alloc::format!(
            "training latent {:?} vs model {:?}",
            bad.latent.shape,
            shape
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut adam = Adam::new(model.params());
    let weight = 1.0 / (options.batch_size * shape.len()) as f64;

    for step in 0..options.steps {
        let mut tape = Tape::new();
        let pv = model.load(&mut tape, true);
        let mut seeds: Vec<(Var, Mat)> = Vec::with_capacity(options.batch_size);
        let mut loss = 0.0;
        let mut last_t = 0;
        for _ in 0..options.batch_size {
            let ex = &data[rng.random_range(0..data.len())];
            let t = rng.random_range(1..=schedule.steps());
            last_t = t;
            let noise = Latent::from_vec(
                shape,
                (0..shape.len())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
            )?;
            let zt = forward_diffuse(&ex.latent, t, &noise, schedule)?;
            let zv = tape.constant(zt.to_rows());
            let fv = model.forward(&mut tape, &pv, zv, t, &ex.cond(), None);
            let (l, seed) = eps_loss_seed(tape.value(fv.eps), &noise, weight);
            loss += l * weight;
            seeds.push((fv.eps, seed));
        }
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step,
                loss,
                t: last_t,
            });
        }
        report.losses.push(loss);
        let pairs: Vec<(Var, &Mat)> = seeds.iter().map(|(v, m)| (*v, m)).collect();
        let mut grads_tape = tape.backward(&pairs);
        let mut grads: BTreeMap<String, Mat> = BTreeMap::new();
        let mut norm2 = 0.0;
        for (name, &var) in &pv {
            if let Some(g) = grads_tape.take(var) {
                norm2 += g.data.iter().map(|v| v * v).sum::<f64>();
                grads.insert(name.clone(), g);
            }
        }
        let norm = norm2.sqrt();
        if !norm.is_finite() {
            return Err(Error::Diverged {
                step,
                loss: f64::NAN,
                t: last_t,
            });
        }
        if norm > options.grad_clip {
            let s = options.grad_clip / norm;
            grads
                .values_mut()
                .for_each(|g| g.data.iter_mut().for_each(|v| *v *= s));
        }
        let progress = step as f64 / options.steps as f64;
        let lr = options.learning_rate * (0.55 + 0.45 * (PI * progress).cos());
        adam.update(model.params_mut(), &grads, lr);
        if step % 100 == 0 {
            log::debug!("toy denoiser step {step}: loss {loss:.4}");
        }
    }
    Ok((model, report))
}

/// Mean squared noise-prediction error over `draws` noisings per example.
pub fn denoising_loss(
    denoiser: &dyn Denoiser,
    data: &[TrainingExample],
    schedule: &NoiseSchedule,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() || draws == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut count = 0usize;
    for ex in data {
        for _ in 0..draws {
            let t = rng.random_range(1..=schedule.steps());
            let shape = ex.latent.shape;
            let noise = Latent::from_vec(
                shape,
                (0..shape.len())
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect(),
            )?;
            let zt = forward_diffuse(&ex.latent, t, &noise, schedule)?;
            let eps = denoiser.denoise(&zt, t, &ex.cond(), None)?.eps;
            total += eps
                .data
                .iter()
                .zip(&noise.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            count += shape.len();
        }
    }
    Ok(total / count as f64)
}
