// SPDX-License-Identifier: MIT OR Apache-2.0

//! WebAssembly entry points for the static demo page in `www/`.
//!
//! Each export returns a JSON string. The plain `*_json` functions hold the
//! logic so they can be tested natively.

use serde::Serialize;
use tsgan::cpd::{detect, CpdConfig, FakeDraws};
use tsgan::gan::{train_on_rows, GanModel, ModelConfig, TrainConfig};
use tsgan::metrics::{w1_sliced, EmpiricalMeasure};
use tsgan::rng::CounterRng;
use tsgan::timeseries::{
    gmc_coupling_decay, simulate_change_point, ChangePointSpec, InitSpec, NoiseSpec, VarSpec,
};
use wasm_bindgen::prelude::*;

const MAX_DEMO_STEPS: usize = 2_000;

#[derive(Serialize)]
struct ChangePointDemo {
    series_first_coordinate: Vec<f64>,
    true_change_index: usize,
    block_starts: Vec<usize>,
    block_losses: Vec<f64>,
    group_start: usize,
    window_losses: Vec<f64>,
    estimate: usize,
}

/// Bivariate AR(1) whose innovation mean jumps by `shift` at row 600 of
/// 1000; a small GAN trained on the first 200 rows drives the detector.
pub fn change_point_json(shift: f64, gen_steps: usize, seed: u64) -> Result<String, String> {
    if !shift.is_finite() {
        return Err("shift must be finite".into());
    }
    let spec = ChangePointSpec {
        p: 2,
        lag_coeffs: vec![0.5],
        cov_scale: 1.0,
        pre_mean: vec![0.0; 2],
        post_mean: vec![shift; 2],
        init: InitSpec::Zeros,
        burn_in: 100,
        n_keep: 1_000,
        change_at_raw: 700,
    };
    let (series, change) = simulate_change_point(&spec, seed).map_err(|e| e.to_string())?;
    let model_cfg = ModelConfig {
        latent_dim: 4,
        generator_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        ..ModelConfig::default()
    };
    let schedule = TrainConfig {
        critic_steps_per_gen: 5,
        warmup_critic_steps: 20,
        batch_size: 32,
        critic_lr: 1e-3,
        generator_lr: 1e-3,
        ..TrainConfig::standard_schedule(gen_steps.min(MAX_DEMO_STEPS))
    };
    let init = GanModel::init(2, &model_cfg, seed).map_err(|e| e.to_string())?;
    let (model, _) = train_on_rows(&init, &series, 0..200, &schedule, seed).map_err(|e| e.to_string())?;
    let cfg = CpdConfig {
        fake_draws: FakeDraws::SharedPool,
        ..CpdConfig::new(200, 50, 5, seed)
    };
    let report = detect(&model, &series, &cfg).map_err(|e| e.to_string())?;
    let out = ChangePointDemo {
        series_first_coordinate: (0..series.len()).map(|t| series.row(t)[0]).collect(),
        true_change_index: change,
        block_starts: report.profile.block_bounds.iter().map(|b| b.0).collect(),
        block_losses: report.profile.losses.clone(),
        group_start: report.merged_group_bounds.0,
        window_losses: report.pi.clone(),
        estimate: report.global_change_estimate,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DecayDemo {
    log_distances: Vec<Option<f64>>,
    slope: Option<f64>,
    contracting: Option<bool>,
}

/// Coupling distances of a scalar VAR(3) with coefficients `a1, a2, a3`.
pub fn coupling_decay_json(a1: f64, a2: f64, a3: f64, horizon: usize, seed: u64) -> Result<String, String> {
    let spec = VarSpec {
        p: 1,
        lag_coeffs: vec![a1, a2, a3],
        noise: NoiseSpec {
            mean: vec![0.0],
            cov_scale: 1.0,
        },
        init: InitSpec::Zeros,
        burn_in: 50,
        n_keep: 100,
    };
    let r = gmc_coupling_decay(&spec, horizon.clamp(10, 1_000), seed).map_err(|e| e.to_string())?;
    let out = DecayDemo {
        log_distances: r
            .distances
            .iter()
            .map(|&d| (d > 0.0 && d.is_finite()).then(|| d.ln()))
            .collect(),
        slope: r.fit.as_ref().map(|f| f.slope),
        contracting: r.contracting,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SlicedDemo {
    value: f64,
    per_sample_floor: f64,
}

/// Sliced W1 between `N(0, I_p)` and `N(shift, scale^2 I_p)` samples, next
/// to the same distance between two independent `N(0, I_p)` samples.
pub fn sliced_w1_json(p: usize, n: usize, shift: f64, scale: f64, seed: u64) -> Result<String, String> {
    if p == 0 || n == 0 || p > 100 || n > 20_000 {
        return Err("need 1 <= p <= 100 and 1 <= n <= 20000".into());
    }
    let mut rng = CounterRng::derived(seed, "demo-samples", 0);
    let mut draw = |mean: f64, sd: f64| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| mean + sd * rng.normal()).collect())
            .collect();
        EmpiricalMeasure::from_rows(&rows)
    };
    let a = draw(0.0, 1.0).map_err(|e| e.to_string())?;
    let b = draw(shift, scale).map_err(|e| e.to_string())?;
    let c = draw(0.0, 1.0).map_err(|e| e.to_string())?;
    let value = w1_sliced(&a, &b, 64, seed).map_err(|e| e.to_string())?.value;
    let floor = w1_sliced(&a, &c, 64, seed).map_err(|e| e.to_string())?.value;
    serde_json::to_string(&SlicedDemo {
        value,
        per_sample_floor: floor,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn change_point_demo(shift: f64, gen_steps: usize, seed: u32) -> Result<String, JsError> {
    change_point_json(shift, gen_steps, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coupling_decay_demo(a1: f64, a2: f64, a3: f64, horizon: usize, seed: u32) -> Result<String, JsError> {
    coupling_decay_json(a1, a2, a3, horizon, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sliced_w1_demo(p: usize, n: usize, shift: f64, scale: f64, seed: u32) -> Result<String, JsError> {
    sliced_w1_json(p, n, shift, scale, seed.into()).map_err(|e| JsError::new(&e))
}
