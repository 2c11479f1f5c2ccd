use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segbench_core::filtering::*;
use segbench_core::scenes::{
    generate_scene, Image, LossMap, PrototypeSegmenter, SceneWorld, SegLabel, IGNORE_INDEX,
};

fn one_pixel(y: f64, class: u8, num_classes: usize) -> (LossMap, SegLabel) {
    (
        LossMap {
            height: 1,
            width: 1,
            values: vec![y],
        },
        SegLabel::new(1, 1, num_classes, vec![class]).unwrap(),
    )
}

fn flagged(profile: &ClassLossProfile, class: u8, y: f64) -> bool {
    let (loss, label) = one_pixel(y, class, profile.num_classes());
    let (out, frac) = pixel_filter(&loss, &label, profile).unwrap();
    assert_eq!(
        frac,
        if out.classes[0] == IGNORE_INDEX {
            1.0
        } else {
            0.0
        }
    );
    out.classes[0] == IGNORE_INDEX
}

#[test]
fn pixel_filter_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let l: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..5.0)).collect();
        let profile = ClassLossProfile {
            counts: vec![1; 3],
            l: l.clone(),
            alpha: 1.0,
        }
        .with_alpha(2.0)
        .unwrap();
        for (g, &lg) in l.iter().enumerate() {
            let g = g as u8;
            let eps = lg * 1e-9;
            assert!(!flagged(&profile, g, lg));
            assert!(!flagged(&profile, g, 2.0 * lg));
            assert!(!flagged(&profile, g, lg / 2.0));
            assert!(flagged(&profile, g, 2.0 * lg + eps));
            assert!(flagged(&profile, g, lg / 2.0 - eps));
        }
    }
}

#[test]
fn worked_pixel_example() {
    let profile = ClassLossProfile {
        l: vec![0.4],
        counts: vec![1],
        alpha: 2.0,
    };
    assert!(!flagged(&profile, 0, 0.7));
    assert!(flagged(&profile, 0, 0.9));
    assert!(flagged(&profile, 0, 0.15));
}

fn random_dataset(rng: &mut ChaCha8Rng, k: usize) -> Vec<(Image, SegLabel)> {
    let n = rng.random_range(2..6);
    (0..n)
        .map(|i| {
            let (h, w) = (rng.random_range(8..14), rng.random_range(8..14));
            let data = (0..h * w * 3).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut classes: Vec<u8> = (0..h * w)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        IGNORE_INDEX
                    } else {
                        rng.random_range(0..k as u8)
                    }
                })
                .collect();
            // Every class must occur at least once.
            if i == 0 {
                for c in 0..k {
                    classes[c] = c as u8;
                }
            }
            (
                Image::new(h, w, data).unwrap(),
                SegLabel::new(h, w, k, classes).unwrap(),
            )
        })
        .collect()
}

/// Per-class mean cross-entropy of the prototype model, from the formula.
fn profile_oracle(data: &[(Image, SegLabel)], model: &PrototypeSegmenter) -> Vec<f64> {
    let k = model.prototypes.len();
    let mut sum = vec![0.0; k];
    let mut n = vec![0usize; k];
    for (img, label) in data {
        for (p, &g) in label.classes.iter().enumerate() {
            if g == IGNORE_INDEX {
                continue;
            }
            let px = &img.data[p * 3..p * 3 + 3];
            let s: Vec<f64> = model
                .prototypes
                .iter()
                .map(|q| {
                    -((px[0] - q[0]).powi(2) + (px[1] - q[1]).powi(2) + (px[2] - q[2]).powi(2))
                        / model.temperature
                })
                .collect();
            let z: f64 = s.iter().map(|v| v.exp()).sum();
            sum[g as usize] += -(s[g as usize].exp() / z).ln();
            n[g as usize] += 1;
        }
    }
    sum.iter().zip(&n).map(|(s, &c)| s / c as f64).collect()
}

#[test]
fn profile_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let k = rng.random_range(2..5);
        let data = random_dataset(&mut rng, k);
        let model = PrototypeSegmenter::fit(&data, rng.random_range(0.1..1.0)).unwrap();
        let profile = class_loss_profile(&data, &model, 2.0).unwrap();
        let want = profile_oracle(&data, &model);
        for g in 0..k {
            assert!(
                (profile.l[g] - want[g]).abs() < 1e-6,
                "class {g}: {} vs {}",
                profile.l[g],
                want[g]
            );
        }
    }
}

#[test]
fn profile_is_order_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = random_dataset(&mut rng, 3);
    let model = PrototypeSegmenter::fit(&data, 0.3).unwrap();
    let a = class_loss_profile(&data, &model, 2.0).unwrap();
    let mut rev = data.clone();
    rev.reverse();
    assert_eq!(a, class_loss_profile(&rev, &model, 2.0).unwrap());
}

#[test]
fn missing_class_is_an_error() {
    let img = Image::filled(2, 2, [0.5; 3]);
    let label = SegLabel::filled(2, 2, 2, 0);
    let model = PrototypeSegmenter::new(vec![[0.5; 3], [0.0; 3]], 0.3).unwrap();
    assert!(class_loss_profile(&[(img, label)], &model, 2.0).is_err());
}

#[test]
fn region_discard_threshold() {
    let t = FilterThresholds::default();
    assert!(!region_discard(0.10, &t));
    assert!(region_discard(0.10 + 1e-12, &t));
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    normalize((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn directional_similarity_properties(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c, d) = (unit(&mut rng, 8), unit(&mut rng, 8), unit(&mut rng, 8), unit(&mut rng, 8));
        let rho = directional_similarity(&a, &b, &c, &d).unwrap();
        prop_assert!((-1.0..=1.0).contains(&rho));
        // Swapping both directions keeps the cosine; swapping one flips it.
        prop_assert!((directional_similarity(&b, &a, &d, &c).unwrap() - rho).abs() < 1e-12);
        prop_assert!((directional_similarity(&b, &a, &c, &d).unwrap() + rho).abs() < 1e-12);
        // Text change parallel to the image change gives 1.
        prop_assert!((directional_similarity(&a, &b, &a, &b).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn recolor_passes_and_unchanged_image_is_rejected() {
    let world = SceneWorld::standard(32);
    let embedder = LexiconEmbedder::for_world(&world, 64, 0).unwrap();
    let t = FilterThresholds::default();
    let spec = world.sample_spec(4);
    let scene = generate_scene(&spec).unwrap();
    let caption = world.caption(&spec);
    let variants = world.recolor_variants(&spec);
    let mut accepted = 0;
    for v in &variants {
        let edited = generate_scene(v).unwrap();
        let edited_caption = world.caption(v);
        if edited_caption == caption {
            continue;
        }
        let m = sample_filter(
            &scene.image,
            &edited.image,
            &caption,
            &edited_caption,
            &embedder,
            &t,
        )
        .unwrap();
        if m.accepted {
            accepted += 1;
        }
        let same = sample_filter(
            &scene.image,
            &scene.image,
            &caption,
            &edited_caption,
            &embedder,
            &t,
        )
        .unwrap();
        assert!(same.directional.is_none() && !same.accepted);
    }
    assert!(accepted > 0);
}
