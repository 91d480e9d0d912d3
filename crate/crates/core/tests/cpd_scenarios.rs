// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use tsgan::cpd::{block_losses, block_partition, detect, CpdConfig, FakeDraws, JumpRule};
use tsgan::gan::{train_on_rows, GanModel, ModelConfig, TrainConfig};
use tsgan::linalg::Matrix;
use tsgan::rng::CounterRng;
use tsgan::timeseries::{
    simulate_change_point, ChangePointSpec, InitSpec, SeriesMeta, SeriesSource, TimeSeriesMatrix,
};

fn scalar_series(values: Vec<f64>) -> TimeSeriesMatrix {
    let n = values.len();
    TimeSeriesMatrix::new(
        Matrix::from_vec(n, 1, values).unwrap(),
        SeriesMeta {
            seed: None,
            burn_in_dropped: 0,
            source: SeriesSource::Generated,
        },
    )
    .unwrap()
}

fn small_model(p: usize, seed: u64) -> GanModel {
    let cfg = ModelConfig {
        latent_dim: 4,
        generator_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        ..ModelConfig::default()
    };
    GanModel::init(p, &cfg, seed).unwrap()
}

fn small_schedule() -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        critic_lr: 1e-3,
        generator_lr: 1e-3,
        ..TrainConfig::standard_schedule(100)
    }
}

/// i.i.d. N(0, 1) with a 10 sd mean jump at row 150. The trained critic
/// may fall or rise across the jump, so the symmetric jump rule and a shared
/// fake pool are used.
#[test]
fn scalar_mean_jump_located_with_symmetric_rule() {
    let mut hits = 0;
    for seed in 0..20u64 {
        let mut rng = CounterRng::derived(seed, "scalar-jump", 0);
        let values: Vec<f64> = (0..300)
            .map(|i| rng.normal() + if i >= 150 { 10.0 } else { 0.0 })
            .collect();
        let series = scalar_series(values);
        let (model, _) =
            train_on_rows(&small_model(1, seed), &series, 0..50, &small_schedule(), seed).unwrap();
        let cfg = CpdConfig {
            jump_rule: JumpRule::Absolute,
            fake_draws: FakeDraws::SharedPool,
            ..CpdConfig::new(50, 20, 3, seed)
        };
        let r = detect(&model, &series, &cfg).unwrap();
        assert_eq!(r.merged_group_bounds, (130, 170));
        if r.global_change_estimate.abs_diff(150) <= 3 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20 within +-3");
}

#[test]
fn no_change_series_not_declared_above_threshold() {
    let spec = ChangePointSpec {
        p: 2,
        lag_coeffs: vec![0.5],
        cov_scale: 1.0,
        pre_mean: vec![0.0; 2],
        post_mean: vec![0.0; 2],
        init: InitSpec::Zeros,
        burn_in: 50,
        n_keep: 1_000,
        change_at_raw: 600,
    };
    let (series, _) = simulate_change_point(&spec, 3).unwrap();
    let (model, _) =
        train_on_rows(&small_model(2, 3), &series, 0..200, &small_schedule(), 3).unwrap();
    let base = CpdConfig::new(200, 50, 4, 11);
    let free = detect(&model, &series, &base).unwrap();
    assert!(free.declared);
    // A threshold above the largest observed jump suppresses the call.
    let cfg = CpdConfig {
        threshold: Some(free.max_jump * 1.01 + 1e-12),
        ..base
    };
    let r = detect(&model, &series, &cfg).unwrap();
    assert!(!r.declared);
    assert_eq!(r.global_change_estimate, free.global_change_estimate);
}

#[test]
fn degenerate_change_has_no_stable_location() {
    let spec = ChangePointSpec {
        p: 2,
        lag_coeffs: vec![0.5],
        cov_scale: 1.0,
        pre_mean: vec![0.0; 2],
        post_mean: vec![0.0; 2],
        init: InitSpec::Zeros,
        burn_in: 50,
        n_keep: 1_000,
        change_at_raw: 600,
    };
    let mut estimates = Vec::new();
    for seed in 0..20u64 {
        let (series, _) = simulate_change_point(&spec, seed).unwrap();
        let (model, _) =
            train_on_rows(&small_model(2, seed), &series, 0..200, &small_schedule(), seed).unwrap();
        estimates.push(detect(&model, &series, &CpdConfig::new(200, 50, 4, seed)).unwrap().global_change_estimate);
    }
    estimates.sort_unstable();
    estimates.dedup_by(|a, b| a.abs_diff(*b) <= 4);
    assert!(estimates.len() >= 10, "estimates cluster: {estimates:?}");
}

fn random_series(n: usize, seed: u64) -> TimeSeriesMatrix {
    let mut rng = CounterRng::new(seed);
    scalar_series((0..n).map(|_| rng.normal()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_tile_the_detection_range(t in 1usize..50, extra in 4usize..300, k in 2usize..40) {
        let n = t + extra;
        let b = block_partition(t, n, k);
        prop_assert_eq!(b[0].0, t);
        prop_assert_eq!(b[b.len() - 1].1, n);
        for w in b.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        prop_assert!(b.iter().all(|(s, e)| e - s >= 2 && e - s <= k + 1));
    }

    #[test]
    fn estimate_inside_merged_group(seed in 0u64..1000, t in 5usize..40, k in 5usize..20) {
        let n = t + 6 * k + 3;
        let series = random_series(n, seed);
        let model = small_model(1, seed);
        let cfg = CpdConfig::new(t, k, 2, seed);
        let r = detect(&model, &series, &cfg).unwrap();
        let (s, e) = r.merged_group_bounds;
        prop_assert!(s <= r.global_change_estimate && r.global_change_estimate < e);
        prop_assert!(r.j_star >= 2 && r.j_star <= e - s);
        prop_assert_eq!(r.global_change_estimate, s + r.j_star - 1);
        let sk = r.profile.selected_k;
        prop_assert!(sk >= 1 && sk < r.profile.losses.len());
        prop_assert_eq!(r.pi.len(), e - s);
    }

    #[test]
    fn constant_critic_gives_zero_losses(seed in 0u64..1000, c in -5.0f64..5.0) {
        let series = random_series(120, seed);
        let mut model = small_model(1, seed);
        for l in &mut model.discriminator.layers {
            l.weight.scale(0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        model.discriminator.layers.last_mut().unwrap().bias[0] = c;
        let p = block_losses(&model, &series, &CpdConfig::new(20, 10, 2, seed)).unwrap();
        prop_assert!(p.losses.iter().all(|&l| l == 0.0));
        prop_assert_eq!(p.selected_k, 1);
    }
}
