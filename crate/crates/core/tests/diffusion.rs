use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segbench_core::appearance::{LatentMask, MaskEnergy};
use segbench_core::diffusion::*;
use segbench_core::tensor::{Latent, LatentShape, Mat};

const SHAPE: LatentShape = LatentShape {
    channels: 3,
    height: 4,
    width: 4,
};

fn random_latent(shape: LatentShape, rng: &mut ChaCha8Rng) -> Latent {
    let data = (0..shape.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Latent::from_vec(shape, data).unwrap()
}

/// Linear denoiser whose map has Frobenius norm (an upper bound on the
/// operator norm) equal to `norm`.
fn linear_with_norm(norm: f64, seed: u64) -> LinearDenoiser {
    let n = SHAPE.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let fro = a.data.iter().map(|v| v * v).sum::<f64>().sqrt();
    a = a.scale(norm / fro);
    let b = (0..n).map(|_| rng.random_range(-0.01..0.01)).collect();
    LinearDenoiser::new(SHAPE, a, b, seed).unwrap()
}

#[test]
fn forward_diffusion_matches_closed_form() {
    let s = make_schedule(50, ScheduleKind::Linear).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z0 = random_latent(SHAPE, &mut rng);
    let noise = random_latent(SHAPE, &mut rng);
    for t in [0, 1, 17, 50] {
        let ab: f64 = s.alphas()[..t].iter().product();
        let z = forward_diffuse(&z0, t, &noise, &s).unwrap();
        for i in 0..z.data.len() {
            let want = ab.sqrt() * z0.data[i] + (1.0 - ab).sqrt() * noise.data[i];
            assert!((z.data[i] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn cosine_schedule_follows_curve() {
    let s = make_schedule(50, ScheduleKind::Cosine).unwrap();
    let off = 0.008;
    let f = |t: f64| {
        (((t / 50.0) + off) / (1.0 + off) * std::f64::consts::FRAC_PI_2)
            .cos()
            .powi(2)
    };
    for t in 0..50 {
        assert!(
            (s.alpha_bar(t) - f(t as f64) / f(0.0)).abs() < 1e-12,
            "t = {t}"
        );
        assert!(s.alpha_bar(t + 1) < s.alpha_bar(t));
    }
}

#[test]
fn ddim_round_trip_zero_map() {
    let s = make_schedule(50, ScheduleKind::Linear).unwrap();
    let d = LinearDenoiser::zero(SHAPE, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z0 = random_latent(SHAPE, &mut rng);
    let tokens = [0u32, 3, 4];
    let cond = Conditioning::text(&tokens);
    let traj = ddim_invert(&z0, &d, &cond, &s).unwrap();
    let back = ddim_sample(&traj[50], &d, &cond, &s).unwrap();
    assert!(back.max_abs_diff(&z0) < 1e-12, "{}", back.max_abs_diff(&z0));
}

fn round_trip_error(norm: f64, kind: ScheduleKind, seed: u64) -> f64 {
    let s = make_schedule(50, kind).unwrap();
    let d = linear_with_norm(norm, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
    let z0 = random_latent(SHAPE, &mut rng);
    let tokens = [0u32, 5];
    let cond = Conditioning::text(&tokens);
    let traj = ddim_invert(&z0, &d, &cond, &s).unwrap();
    ddim_sample(&traj[50], &d, &cond, &s)
        .unwrap()
        .max_abs_diff(&z0)
}

// The inversion reuses eps(z_{t-1}) in place of eps(z_t), so for eps = A·z + b
// the round-trip error is first order in ‖A‖ and independent of b.
#[test]
fn ddim_round_trip_error_is_first_order_in_the_map() {
    for kind in [ScheduleKind::Linear, ScheduleKind::Cosine] {
        for seed in 0..3 {
            let e2 = round_trip_error(1e-2, kind, seed);
            let e3 = round_trip_error(1e-3, kind, seed);
            let e4 = round_trip_error(1e-4, kind, seed);
            assert!((e2 / e3 - 10.0).abs() < 0.1, "{kind:?}: {e2} vs {e3}");
            assert!((e3 / e4 - 10.0).abs() < 0.1, "{kind:?}: {e3} vs {e4}");
        }
    }
    assert!(round_trip_error(1e-5, ScheduleKind::Linear, 0) < 1e-5);
}

#[test]
fn ddim_step_inverts_invert_step_for_fixed_noise() {
    let s = make_schedule(50, ScheduleKind::Linear).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_latent(SHAPE, &mut rng);
    let eps = random_latent(SHAPE, &mut rng);
    for t in [1, 25, 50] {
        let up = ddim_invert_step(&z, &eps, t, &s).unwrap();
        let down = ddim_step(&up, &eps, t, &s).unwrap();
        assert!(down.max_abs_diff(&z) < 1e-10);
    }
}

fn mask_for(shape: LatentShape, seed: u64) -> LatentMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..shape.positions())
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    values[0] = 1.0;
    LatentMask::new(shape.height, shape.width, values).unwrap()
}

/// Central differences of the energy with respect to each latent entry.
fn finite_difference(
    d: &dyn Denoiser,
    z: &Latent,
    cond: &Conditioning<'_>,
    energy: &MaskEnergy<'_>,
    h: f64,
) -> Vec<f64> {
    let layer = d.guidance_layer().to_string();
    (0..z.data.len())
        .map(|i| {
            let mut zp = z.clone();
            zp.data[i] += h;
            let mut zm = z.clone();
            zm.data[i] -= h;
            let fp = d
                .attention_gradient(&zp, 10, cond, &layer, energy)
                .unwrap()
                .value;
            let fm = d
                .attention_gradient(&zm, 10, cond, &layer, energy)
                .unwrap()
                .value;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

#[test]
fn toy_attention_gradient_matches_finite_differences() {
    let mut config = ToyConfig::new(SHAPE, 4, 10);
    config.seed = 9;
    let d = ToyDenoiser::init(config).unwrap();
    let tokens = [0u32, 3, 7, 2];
    let structure = Mat::from_fn(
        SHAPE.positions(),
        4,
        |r, c| if r % 4 == c { 1.0 } else { 0.0 },
    );
    let cond = Conditioning {
        tokens: &tokens,
        structure: Some(&structure),
    };
    let mask = mask_for(SHAPE, 4);
    let cols = [2usize];
    let energy = MaskEnergy {
        edit_columns: &cols,
        mask: &mask,
        include_special: true,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let z = random_latent(SHAPE, &mut rng);
        let g = d
            .attention_gradient(&z, 10, &cond, d.guidance_layer(), &energy)
            .unwrap();
        let fd = finite_difference(&d, &z, &cond, &energy, 1e-5);
        let err = relative_error(&g.grad.data, &fd);
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn toy_training_reduces_loss() {
    let shape = LatentShape {
        channels: 3,
        height: 2,
        width: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let examples: Vec<TrainingExample> = (0..4)
        .map(|i| TrainingExample {
            latent: random_latent(shape, &mut rng),
            tokens: vec![0, 1 + i as u32],
            structure: None,
        })
        .collect();
    let s = make_schedule(10, ScheduleKind::Linear).unwrap();
    let mut config = ToyConfig::new(shape, 2, 6);
    config.steps = 10;
    let opts = TrainOptions {
        steps: 200,
        ..TrainOptions::default()
    };
    let (_, report) = train_toy_denoiser(config, &examples, &s, &opts).unwrap();
    let head: f64 = report.losses[..20].iter().sum::<f64>() / 20.0;
    let tail: f64 = report.losses[report.losses.len() - 20..]
        .iter()
        .sum::<f64>()
        / 20.0;
    assert!(tail < head, "loss went from {head} to {tail}");
}

#[test]
fn toy_denoiser_is_deterministic() {
    let d = ToyDenoiser::init(ToyConfig::new(SHAPE, 3, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z = random_latent(SHAPE, &mut rng);
    let tokens = [0u32, 1, 2];
    let a = d
        .denoise(&z, 5, &Conditioning::text(&tokens), None)
        .unwrap();
    let b = d
        .denoise(&z, 5, &Conditioning::text(&tokens), None)
        .unwrap();
    assert_eq!(a.eps, b.eps);
    let attn = &a.cross_attn[d.guidance_layer()];
    assert!(attn.max_normalization_error() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn schedules_are_monotone(steps in 1usize..200, cosine in any::<bool>()) {
        let kind = if cosine { ScheduleKind::Cosine } else { ScheduleKind::Linear };
        let s = make_schedule(steps, kind).unwrap();
        prop_assert_eq!(s.alpha_bar(0), 1.0);
        for t in 1..=steps {
            prop_assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            prop_assert!(s.alpha_bar(t) > 0.0);
        }
    }

    #[test]
    fn predict_x0_inverts_forward(seed in any::<u64>(), t in 1usize..=50) {
        let s = make_schedule(50, ScheduleKind::Linear).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z0 = random_latent(SHAPE, &mut rng);
        let noise = random_latent(SHAPE, &mut rng);
        let zt = forward_diffuse(&z0, t, &noise, &s).unwrap();
        let x0 = predict_x0(&zt, &noise, t, &s).unwrap();
        prop_assert!(x0.max_abs_diff(&z0) < 1e-8);
    }
}
