use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segbench_core::appearance::*;
use segbench_core::diffusion::*;
use segbench_core::prompt::{tokenize, AttributeKind, EditRequest, Span, Vocabulary};
use segbench_core::scenes::{generate_scene, BinaryMask, SceneWorld};
use segbench_core::tensor::{Latent, LatentShape};

const SHAPE: LatentShape = LatentShape {
    channels: 3,
    height: 5,
    width: 6,
};

fn random_latent(rng: &mut ChaCha8Rng) -> Latent {
    Latent::from_vec(
        SHAPE,
        (0..SHAPE.len())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect(),
    )
    .unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, binary: bool) -> LatentMask {
    let mut v: Vec<f64> = (0..SHAPE.positions())
        .map(|_| {
            if binary {
                f64::from(u8::from(rng.random_bool(0.4)))
            } else {
                rng.random_range(0.0..=1.0)
            }
        })
        .collect();
    v[3] = 1.0;
    LatentMask::new(SHAPE.height, SHAPE.width, v).unwrap()
}

/// Energy recomputed from the attention tensor with plain loops.
fn energy_oracle(
    attn: &CrossAttention,
    cols: &[usize],
    mask: &LatentMask,
    include_special: bool,
) -> f64 {
    let first = usize::from(!include_special);
    let mut acc = 0.0;
    for p in 0..attn.positions() {
        let mut num = 0.0;
        let mut den = 0.0;
        for n in first..attn.tokens {
            let mean: f64 =
                (0..attn.heads).map(|h| attn.get(h, p, n)).sum::<f64>() / attn.heads as f64;
            den += mean;
            if cols.contains(&n) {
                num += mean;
            }
        }
        acc += mask.values[p] * num / den;
    }
    let count = mask.values.iter().filter(|&&m| m >= 0.5).count() as f64;
    (1.0 - acc / count).powi(2)
}

#[test]
fn energy_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = LinearDenoiser::random(SHAPE, 0.01, 3);
    let tokens = [0u32, 4, 9, 2, 7];
    for include_special in [true, false] {
        for _ in 0..10 {
            let z = random_latent(&mut rng);
            let mask = random_mask(&mut rng, false);
            let out = d
                .denoise(&z, 3, &Conditioning::text(&tokens), None)
                .unwrap();
            let attn = &out.cross_attn[LINEAR_ATTENTION_LAYER];
            let cols = [2usize, 3];
            let got = mask_energy(attn, &cols, &mask, include_special).unwrap();
            let want = energy_oracle(attn, &cols, &mask, include_special);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }
}

#[test]
fn energy_gradient_matches_central_differences() {
    let d = LinearDenoiser::random(SHAPE, 0.01, 7).with_attention_scale(2.0);
    let tokens = [0u32, 11, 5, 8];
    let cond = Conditioning::text(&tokens);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-5;
    for i in 0..20 {
        let z = random_latent(&mut rng);
        let mask = random_mask(&mut rng, i % 2 == 0);
        let cols = [1 + i % 3];
        let energy = MaskEnergy {
            edit_columns: &cols,
            mask: &mask,
            include_special: i % 3 != 0,
        };
        let g = d
            .attention_gradient(&z, 20, &cond, LINEAR_ATTENTION_LAYER, &energy)
            .unwrap();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for k in 0..z.data.len() {
            let mut zp = z.clone();
            zp.data[k] += h;
            let mut zm = z.clone();
            zm.data[k] -= h;
            let fp = d
                .attention_gradient(&zp, 20, &cond, LINEAR_ATTENTION_LAYER, &energy)
                .unwrap()
                .value;
            let fm = d
                .attention_gradient(&zm, 20, &cond, LINEAR_ATTENTION_LAYER, &energy)
                .unwrap()
                .value;
            let fd = (fp - fm) / (2.0 * h);
            diff += (g.grad.data[k] - fd).powi(2);
            norm += fd * fd;
        }
        let rel = diff.sqrt() / norm.sqrt().max(1e-12);
        assert!(rel < 1e-4, "latent {i}: relative error {rel}");
    }
}

#[test]
fn guidance_lowers_the_energy() {
    let d = LinearDenoiser::random(SHAPE, 0.01, 8).with_attention_scale(2.0);
    let tokens = [0u32, 3, 6];
    let cond = Conditioning::text(&tokens);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z = random_latent(&mut rng);
    let mask = random_mask(&mut rng, true);
    let cols = [2usize];
    let config = EditConfig {
        gamma: 1e-6,
        max_guidance_iters: 5,
        ..EditConfig::default()
    };
    let energy = MaskEnergy {
        edit_columns: &cols,
        mask: &mask,
        include_special: true,
    };
    let before = d
        .attention_gradient(&z, 10, &cond, LINEAR_ATTENTION_LAYER, &energy)
        .unwrap()
        .value;
    let (_, after, iters) = guided_update(&z, 10, &d, &cond, &cols, &mask, &config).unwrap();
    assert_eq!(iters, 5);
    assert!(after < before, "{before} -> {after}");
}

#[test]
fn guidance_stops_at_threshold() {
    let d = LinearDenoiser::random(SHAPE, 0.01, 8);
    let tokens = [0u32, 3, 6];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = random_latent(&mut rng);
    let mask = random_mask(&mut rng, true);
    let config = EditConfig {
        gamma: f64::INFINITY,
        ..EditConfig::default()
    };
    let (out, _, iters) = guided_update(
        &z,
        10,
        &d,
        &Conditioning::text(&tokens),
        &[1],
        &mask,
        &config,
    )
    .unwrap();
    assert_eq!(iters, 0);
    assert_eq!(out, z);
}

#[test]
fn injection_covers_leading_steps() {
    let config = EditConfig::default();
    let f: Vec<usize> = (1..=50)
        .filter(|&s| inject_at(s, config.theta_f, 50))
        .collect();
    let a: Vec<usize> = (1..=50)
        .filter(|&s| inject_at(s, config.theta_a, 50))
        .collect();
    assert_eq!(f, (1..=40).collect::<Vec<_>>());
    assert_eq!(a, (1..=25).collect::<Vec<_>>());
    assert!((1..=50).all(|s| !inject_at(s, 0.0, 50)));
    assert!((1..=50).all(|s| inject_at(s, 1.0, 50)));
}

fn scene_request(
    world: &SceneWorld,
    seed: u64,
) -> (segbench_core::scenes::Scene, EditRequest, Vocabulary) {
    let spec = world.sample_spec(seed);
    let scene = generate_scene(&spec).unwrap();
    let caption = world.caption(&spec);
    let tokens = tokenize(&caption);
    let color = tokens
        .iter()
        .position(|t| world.palette_color(t).is_some())
        .expect("caption names a color");
    let n = tokens.len();
    let request = EditRequest {
        source: caption.clone(),
        target: caption,
        source_tokens: tokens.clone(),
        target_tokens: tokens.clone(),
        source_span: Span::empty_at(n),
        target_span: Span::empty_at(n),
        edit_indices: vec![color],
        kind: AttributeKind::Color,
        value: tokens[color].clone(),
    };
    let mut words: Vec<String> = tokens;
    words.extend(world.class_names());
    (scene, request, Vocabulary::new(words))
}

#[test]
fn identical_prompts_reproduce_reconstruction() {
    let world = SceneWorld::standard(24);
    let (scene, request, vocab) = scene_request(&world, 5);
    let shape = latent_shape_for(24, 24).unwrap();
    let mut tc = ToyConfig::new(shape, world.num_classes(), vocab.len());
    tc.seed = 2;
    let d = ToyDenoiser::init(tc).unwrap();
    let schedule = make_schedule(50, ScheduleKind::Linear).unwrap();
    let config = EditConfig {
        eta: 0.0,
        gamma: f64::INFINITY,
        ..EditConfig::default()
    };
    let mask = &scene.objects[0].mask;
    let out = edit_appearance(
        &scene.image,
        &scene.label,
        mask,
        &request,
        &d,
        &vocab,
        &schedule,
        &config,
    )
    .unwrap();
    assert_eq!(out.latent, out.reconstruction);
    assert_eq!(out.log.steps.len(), 50);
    assert!(out.log.steps.iter().all(|s| s.guidance_iters == 0));
}

#[test]
fn local_edit_leaves_outside_cells_untouched() {
    let world = SceneWorld::standard(24);
    let (scene, mut request, mut vocab) = scene_request(&world, 9);
    let color = request.edit_indices[0];
    let other = world
        .palette
        .iter()
        .find(|c| c.name != request.target_tokens[color])
        .unwrap()
        .name
        .clone();
    request.target_tokens[color] = other.clone();
    request.target = request.target_tokens.join(" ");
    request.value = other.clone();
    let mut words = vocab.words().to_vec();
    words.push(other);
    vocab = Vocabulary::new(words);
    let shape = latent_shape_for(24, 24).unwrap();
    let d = ToyDenoiser::init(ToyConfig::new(shape, world.num_classes(), vocab.len())).unwrap();
    let schedule = make_schedule(50, ScheduleKind::Linear).unwrap();
    let config = EditConfig {
        max_guidance_iters: 2,
        ..EditConfig::default()
    };
    let mask = &scene.objects[0].mask;
    let out = edit_appearance(
        &scene.image,
        &scene.label,
        mask,
        &request,
        &d,
        &vocab,
        &schedule,
        &config,
    )
    .unwrap();
    let lm = LatentMask::from_pixels(mask).unwrap();
    let n = shape.positions();
    let mut outside = 0;
    for (i, (e, r)) in out
        .latent
        .data
        .iter()
        .zip(&out.reconstruction.data)
        .enumerate()
    {
        if lm.values[i % n] == 0.0 {
            assert_eq!(e, r);
            outside += 1;
        }
    }
    assert!(outside > 0);
    assert_ne!(out.latent, out.reconstruction);
}

#[test]
fn pixel_mask_downsamples_to_coverage() {
    let mask = BinaryMask::from_fn(8, 8, |y, x| y < 4 && x < 2);
    let lm = LatentMask::from_pixels(&mask).unwrap();
    assert_eq!(lm.values, vec![0.5, 0.0, 0.0, 0.0]);
    assert_eq!(lm.count, 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn blend_is_idempotent_and_exact_at_the_boundary(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_latent(&mut rng);
        let r = random_latent(&mut rng);
        let m: Vec<f64> = (0..SHAPE.positions())
            .map(|_| match rng.random_range(0..3) { 0 => 0.0, 1 => 1.0, _ => rng.random_range(0.0..1.0) })
            .collect();
        let once = blend_latents(&e, &r, &m).unwrap();
        let twice = blend_latents(&once, &r, &m).unwrap();
        let n = SHAPE.positions();
        for i in 0..e.data.len() {
            let mi = m[i % n];
            if mi == 1.0 {
                prop_assert_eq!(once.data[i], e.data[i]);
            } else if mi == 0.0 {
                prop_assert_eq!(once.data[i], r.data[i]);
            } else {
                prop_assert!((once.data[i] - (mi * e.data[i] + (1.0 - mi) * r.data[i])).abs() < 1e-12);
            }
            if mi == 0.0 || mi == 1.0 {
                prop_assert_eq!(twice.data[i], once.data[i]);
            }
        }
        let binary: Vec<f64> = m.iter().map(|v| v.round()).collect();
        let b1 = blend_latents(&e, &r, &binary).unwrap();
        prop_assert_eq!(blend_latents(&b1, &r, &binary).unwrap(), b1);
    }
}
