// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use serde::Serialize;
use tsgan::cpd::{self, CpdConfig, DetectionReport, Execution, FakeDraws, JumpRule};
use tsgan::gan::{self, GanModel, TrainConfig};
use tsgan::metrics::{self, EmpiricalMeasure, W1Result, DEFAULT_PROJECTIONS, EXACT_MAX_POINTS};
use tsgan::timeseries::{
    self, gmc_coupling_decay, s_dependent_surrogate, simulate_change_point, simulate_var,
    tail_diagnostic, CouplingDecayReport, TailReport, TimeSeriesMatrix, VarSpec,
};
use tsgan::{Error, Result};

use crate::config::{resolve_seed, sibling, Metric, PipelineConfig, Preset, Simulation};

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub struct Context {
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
}

impl Context {
    fn load(&self) -> Result<(PipelineConfig, u64)> {
        let cfg = PipelineConfig::load(self.config_path.as_deref())?;
        let seed = resolve_seed(self.seed, cfg.seed)?;
        Ok((cfg, seed))
    }
}

fn required(flag: Option<PathBuf>, config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| config.clone())
        .ok_or_else(|| Error::Validation(format!("missing --{name} (or paths.{name} in the config)")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn simulation_for(ctx: &Context, cfg: &PipelineConfig) -> Result<Simulation> {
    match (ctx.preset, &cfg.simulation) {
        (Some(p), _) => Ok(p.simulation()),
        (None, Some(s)) => Ok(s.clone()),
        (None, None) => Err(Error::Validation(
            "no simulation spec: pass --preset or add a `simulation` section".into(),
        )),
    }
}

#[derive(Serialize)]
struct SimulateMeta<'a> {
    format_version: u32,
    seed: u64,
    rows: usize,
    columns: usize,
    burn_in_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_change_index: Option<usize>,
    simulation: &'a Simulation,
}

pub fn simulate(ctx: &Context, out: Option<PathBuf>) -> Result<()> {
    let (cfg, seed) = ctx.load()?;
    let out = required(out, &cfg.paths.out, "out")?;
    let sim = simulation_for(ctx, &cfg)?;
    let (series, change) = match &sim {
        Simulation::Var(spec) => (simulate_var(spec, seed)?, None),
        Simulation::ChangePoint(spec) => {
            let (s, idx) = simulate_change_point(spec, seed)?;
            (s, Some(idx))
        }
    };
    timeseries::save_csv(&series, &out)?;
    let meta = SimulateMeta {
        format_version: REPORT_FORMAT_VERSION,
        seed,
        rows: series.len(),
        columns: series.dim(),
        burn_in_dropped: series.meta.burn_in_dropped,
        true_change_index: change,
        simulation: &sim,
    };
    write_json(&sibling(&out, ".meta.json"), &meta)
}

pub struct TrainArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub t: Option<usize>,
    pub steps: Option<usize>,
    pub standard_schedule: bool,
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<()> {
    let (cfg, seed) = ctx.load()?;
    let data_path = required(args.data, &cfg.paths.data, "data")?;
    let out = required(args.out, &cfg.paths.out, "out")?;
    let series = timeseries::load_csv(&data_path)?;

    let model_cfg = match (&cfg.model, ctx.preset) {
        (Some(m), _) => m.clone(),
        (None, Some(p)) => p.model(),
        (None, None) => Default::default(),
    };
    let mut schedule = match (&cfg.train, ctx.preset) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => p.train(),
        (None, None) => TrainConfig::default(),
    };
    if args.standard_schedule {
        schedule = TrainConfig {
            warmup_critic_steps: 100,
            critic_steps_per_gen: 25,
            batch_size: 64,
            ..schedule
        };
    }
    if let Some(steps) = args.steps {
        schedule.total_gen_steps = steps;
        if steps == 0 {
            schedule.warmup_critic_steps = 0;
        }
    }
    let t = args
        .t
        .or(cfg.cpd.t)
        .or_else(|| ctx.preset.and_then(|p| p.cpd()).map(|c| c.0))
        .unwrap_or(series.len());
    if t == 0 || t > series.len() {
        return Err(Error::Validation(format!(
            "training prefix t = {t} must lie in 1..={}",
            series.len()
        )));
    }

    let init = GanModel::init(series.dim(), &model_cfg, seed)?;
    match gan::train_on_rows(&init, &series, 0..t, &schedule, seed) {
        Ok((model, trace)) => {
            gan::save_checkpoint(&model, &out)?;
            trace.save_csv(&sibling(&out, ".trace.csv"))
        }
        Err(Error::Diverged { step, last_good }) => {
            let partial = sibling(&out, ".last_good.json");
            gan::save_checkpoint(&last_good, &partial)?;
            eprintln!("wrote last good parameters to {}", partial.display());
            Err(Error::Diverged { step, last_good })
        }
        Err(e) => Err(e),
    }
}

pub struct DetectArgs {
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub t: Option<usize>,
    pub block_size: Option<usize>,
    pub window_radius: Option<usize>,
    pub threshold: Option<f64>,
    pub jump_rule: Option<JumpRule>,
    pub fake_draws: Option<FakeDraws>,
    pub parallel: bool,
    pub allow_training_overlap: bool,
    pub emit_plots: bool,
}

pub fn detect(ctx: &Context, args: DetectArgs) -> Result<()> {
    let (cfg, seed) = ctx.load()?;
    let data_path = required(args.data, &cfg.paths.data, "data")?;
    let ck_path = required(args.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
    let out = required(args.out, &cfg.paths.out, "out")?;
    let series = timeseries::load_csv(&data_path)?;
    let model = gan::load_checkpoint(&ck_path)?;
    let preset = ctx.preset.and_then(|p| p.cpd());
    let section = &cfg.cpd;

    let trained_end = model.provenance.as_ref().map(|p| p.train_rows.1);
    let t = args
        .t
        .or(section.t)
        .or(preset.map(|c| c.0))
        .or(trained_end)
        .ok_or_else(|| Error::Validation("missing --t and the checkpoint records no training range".into()))?;
    let block_size = args
        .block_size
        .or(section.block_size)
        .or(preset.map(|c| c.1))
        .ok_or_else(|| Error::Validation("missing --block-size".into()))?;
    let window_radius = args
        .window_radius
        .or(section.window_radius)
        .or(preset.map(|c| c.2))
        .ok_or_else(|| Error::Validation("missing --window-radius".into()))?;
    let config = CpdConfig {
        t,
        block_size,
        window_radius,
        threshold: args.threshold.or(section.threshold),
        seed,
        jump_rule: args.jump_rule.or(section.jump_rule).unwrap_or(JumpRule::Signed),
        fake_draws: args.fake_draws.or(section.fake_draws).unwrap_or(FakeDraws::Fresh),
        execution: if args.parallel || section.parallel == Some(true) {
            Execution::Parallel
        } else {
            Execution::Serial
        },
        allow_training_overlap: args.allow_training_overlap
            || section.allow_training_overlap == Some(true),
    };
    let report: DetectionReport = cpd::detect(&model, &series, &config)?;
    std::fs::write(&out, report.to_json())?;
    if args.emit_plots {
        report.save_plots(&sibling(&out, ".blocks.csv"), &sibling(&out, ".windows.csv"))?;
    }
    Ok(())
}

pub struct EvalArgs {
    pub checkpoint: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub projections: Option<usize>,
    pub metrics: Option<Vec<Metric>>,
    pub samples_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvalReport {
    format_version: u32,
    seed: u64,
    samples: usize,
    reference_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    w1_exact: Option<W1Result>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w1_sliced: Option<W1Result>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nn_distance: Option<f64>,
    warnings: Vec<String>,
}

pub fn eval(ctx: &Context, args: EvalArgs) -> Result<()> {
    let (cfg, seed) = ctx.load()?;
    let ck_path = required(args.checkpoint, &cfg.paths.checkpoint, "checkpoint")?;
    let ref_path = required(args.reference, &cfg.paths.reference, "reference")?;
    let out = required(args.out, &cfg.paths.out, "out")?;
    let model = gan::load_checkpoint(&ck_path)?;
    let reference = timeseries::load_csv(&ref_path)?;
    let count = args.samples.or(cfg.eval.samples).unwrap_or(reference.len());
    let projections = args
        .projections
        .or(cfg.eval.projections)
        .unwrap_or(DEFAULT_PROJECTIONS);
    let wanted = args
        .metrics
        .or_else(|| cfg.eval.metrics.clone())
        .unwrap_or_else(|| vec![Metric::W1Exact, Metric::W1Sliced, Metric::NnDistance]);

    let generated = gan::sample_generator(&model, count, seed)?;
    if let Some(path) = &args.samples_out {
        timeseries::save_csv(&generated, path)?;
    }
    let gen_m = EmpiricalMeasure::from_series(&generated);
    let ref_m = EmpiricalMeasure::from_series(&reference);
    let mut warnings = Vec::new();
    let mut w1_sliced = None;
    let mut w1_exact = None;
    let mut want_sliced = wanted.contains(&Metric::W1Sliced);
    if wanted.contains(&Metric::W1Exact) {
        if gen_m.len() == ref_m.len() && gen_m.len() <= EXACT_MAX_POINTS {
            let mut r = metrics::w1_exact(&gen_m, &ref_m)?;
            r.matching = None;
            w1_exact = Some(r);
        } else {
            let msg = format!(
                "exact W1 needs equal sizes of at most {EXACT_MAX_POINTS} points \
                 (got {} and {}); reporting sliced W1 instead",
                gen_m.len(),
                ref_m.len()
            );
            eprintln!("warning: {msg}");
            warnings.push(msg);
            want_sliced = true;
        }
    }
    if want_sliced {
        w1_sliced = Some(metrics::w1_sliced(&gen_m, &ref_m, projections, seed)?);
    }
    let nn_distance = if wanted.contains(&Metric::NnDistance) {
        Some(metrics::nn_distance(&model.discriminator, &ref_m, &gen_m)?)
    } else {
        None
    };
    write_json(
        &out,
        &EvalReport {
            format_version: REPORT_FORMAT_VERSION,
            seed,
            samples: count,
            reference_rows: reference.len(),
            w1_exact,
            w1_sliced,
            nn_distance,
            warnings,
        },
    )
}

pub struct DiagnoseArgs {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub surrogate_s: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct SurrogateSummary {
    s: usize,
    mean_abs_deviation: f64,
    max_abs_deviation: f64,
}

#[derive(Serialize)]
struct DiagnoseReport {
    format_version: u32,
    seed: u64,
    spec: VarSpec,
    coupling: CouplingDecayReport,
    tail_source: String,
    tail: TailReport,
    surrogates: Vec<SurrogateSummary>,
}

pub fn diagnose(ctx: &Context, args: DiagnoseArgs) -> Result<()> {
    let (cfg, seed) = ctx.load()?;
    let out = required(args.out, &cfg.paths.out, "out")?;
    let spec = match simulation_for(ctx, &cfg)? {
        Simulation::Var(spec) => spec,
        Simulation::ChangePoint(_) => {
            return Err(Error::Validation(
                "diagnostics need a stationary VAR spec, not a change-point spec".into(),
            ))
        }
    };
    let horizon = args.horizon.or(cfg.diagnose.horizon).unwrap_or(200);
    let coupling = gmc_coupling_decay(&spec, horizon, seed)?;

    let series = simulate_var(&spec, seed)?;
    let (tail_source, tail) = match args.data.or(cfg.paths.data.clone()) {
        Some(path) => {
            let data = timeseries::load_csv(&path)?;
            (path.display().to_string(), tail_diagnostic(&data)?)
        }
        None => ("simulated".to_string(), tail_diagnostic(&series)?),
    };

    let q = spec.max_lag();
    let s_values = args
        .surrogate_s
        .or_else(|| cfg.diagnose.surrogate_s.clone())
        .unwrap_or_else(|| vec![q.max(5), q.max(20), q.max(50)]);
    let mut surrogates = Vec::with_capacity(s_values.len());
    for s in s_values {
        let approx = s_dependent_surrogate(&spec, s, seed)?;
        let (mean, max) = deviation(&series, &approx);
        surrogates.push(SurrogateSummary {
            s,
            mean_abs_deviation: mean,
            max_abs_deviation: max,
        });
    }
    write_json(
        &out,
        &DiagnoseReport {
            format_version: REPORT_FORMAT_VERSION,
            seed,
            spec,
            coupling,
            tail_source,
            tail,
            surrogates,
        },
    )
}

fn deviation(a: &TimeSeriesMatrix, b: &TimeSeriesMatrix) -> (f64, f64) {
    let (mut sum, mut max) = (0.0f64, 0.0f64);
    let xs = a.data().as_slice();
    let ys = b.data().as_slice();
    for (x, y) in xs.iter().zip(ys) {
        let d = (x - y).abs();
        sum += d;
        max = max.max(d);
    }
    (sum / xs.len() as f64, max)
}
