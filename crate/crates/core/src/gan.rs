// SPDX-License-Identifier: MIT OR Apache-2.0

//! Min-max training of a generator against a Lipschitz-budgeted critic on
//! the rows of a stationary series.
//!
//! The critic ascends `mean d(X_i) - mean d(g(z_i))` over minibatches; the
//! generator descends the same objective through the fake term. After every
//! critic update the critic is projected back onto its operator-norm budget
//! (or weight-clipped in the fallback mode).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{
    adam_step, clip_weights, project_lipschitz, Activation, AdamConfig, AdamState,
    LipschitzBudget, MlpParams, NetworkCheckpoint, ParamGrads,
};
use crate::rng::{splitmix64_mix, CounterRng};
use crate::timeseries::{SeriesMeta, SeriesSource, TimeSeriesMatrix};

pub const GAN_FORMAT_VERSION: u32 = 1;

/// How the critic is kept inside its Lipschitz class after each update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Enforcement {
    /// Rescale layers to `K^(1/(L+1))` operator norm.
    SpectralProjection,
    /// Clip every weight to `[-c, c]`.
    WeightClip { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub activation: Activation,
    pub bias_enabled: bool,
    /// Lipschitz budget `K` of the critic.
    pub budget_k: f64,
    pub power_iters: usize,
    /// Critic outputs are clamped to `[-B, B]`.
    pub clamp: f64,
    pub enforcement: Enforcement,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            generator_hidden: vec![64, 64, 64],
            critic_hidden: vec![64, 64, 64],
            activation: Activation::leaky(),
            bias_enabled: true,
            budget_k: 1.0,
            power_iters: LipschitzBudget::DEFAULT_POWER_ITERS,
            clamp: 50.0,
            enforcement: Enforcement::SpectralProjection,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Minibatch {
    /// Rows drawn uniformly with replacement.
    Uniform,
    /// One contiguous run of rows from a uniform start.
    Contiguous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub warmup_critic_steps: usize,
    pub critic_steps_per_gen: usize,
    pub batch_size: usize,
    pub total_gen_steps: usize,
    pub critic_lr: f64,
    pub generator_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub minibatch: Minibatch,
}

impl TrainConfig {
    /// Warm-up of 100 critic updates, then 25 critic updates per generator
    /// update, batches of 64.
    pub fn standard_schedule(total_gen_steps: usize) -> Self {
        Self {
            warmup_critic_steps: 100,
            critic_steps_per_gen: 25,
            batch_size: 64,
            total_gen_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.critic_steps_per_gen == 0 || self.batch_size == 0 {
            return Err(Error::invalid(
                "critic_steps_per_gen and batch_size must be positive",
            ));
        }
        self.adam(self.critic_lr).validate()?;
        self.adam(self.generator_lr).validate()
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
        }
    }

    /// Stable digest of the configuration.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h = 0x243F_6A88_85A3_08D3u64;
        for chunk in text.as_bytes().chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            h = splitmix64_mix(h ^ u64::from_le_bytes(word));
        }
        format!("{h:016x}")
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            warmup_critic_steps: 100,
            critic_steps_per_gen: 25,
            batch_size: 64,
            total_gen_steps: 1000,
            critic_lr: 1e-4,
            generator_lr: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            minibatch: Minibatch::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub critic_steps: usize,
    pub generator_steps: usize,
    pub config_hash: String,
    pub schedule: TrainConfig,
    /// Half-open row range `[start, end)` of the series used for training.
    pub train_rows: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanModel {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub latent_dim: usize,
    pub budget: LipschitzBudget,
    pub enforcement: Enforcement,
    pub init_seed: u64,
    pub provenance: Option<Provenance>,
}

impl GanModel {
    /// Gaussian-initialized generator `latent_dim -> p` and critic `p -> 1`;
    /// the critic starts inside its budget.
    pub fn init(p: usize, config: &ModelConfig, seed: u64) -> Result<Self> {
        if p == 0 || config.latent_dim == 0 {
            return Err(Error::invalid("data and latent dimensions must be positive"));
        }
        if !(config.clamp > 0.0 && config.clamp.is_finite()) {
            return Err(Error::invalid("critic clamp must be positive"));
        }
        let budget = LipschitzBudget {
            k: config.budget_k,
            power_iters: config.power_iters,
        };
        budget.validate()?;
        let gain = match config.activation {
            Activation::LeakyRelu { slope } => (2.0 / (1.0 + slope * slope)).sqrt(),
            Activation::Relu => std::f64::consts::SQRT_2,
            Activation::Identity => 1.0,
        };
        let mut g_dims = vec![config.latent_dim];
        g_dims.extend(&config.generator_hidden);
        g_dims.push(p);
        let mut d_dims = vec![p];
        d_dims.extend(&config.critic_hidden);
        d_dims.push(1);
        let mut g_rng = CounterRng::derived(seed, "init-generator", 0);
        let mut d_rng = CounterRng::derived(seed, "init-critic", 0);
        let generator = MlpParams::gaussian(&g_dims, config.activation, gain, &mut g_rng)?
            .with_bias(config.bias_enabled);
        let discriminator = MlpParams::gaussian(&d_dims, config.activation, gain, &mut d_rng)?
            .with_bias(config.bias_enabled)
            .with_clamp(Some(config.clamp));
        let mut model = Self {
            generator,
            discriminator,
            latent_dim: config.latent_dim,
            budget,
            enforcement: config.enforcement,
            init_seed: seed,
            provenance: None,
        };
        model.enforce_budget();
        Ok(model)
    }

    pub fn data_dim(&self) -> usize {
        self.generator.output_dim()
    }

    pub fn clamp(&self) -> Option<f64> {
        self.discriminator.output_clamp
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        if self.generator.input_dim() != self.latent_dim {
            return Err(Error::shape("generator input differs from latent dimension"));
        }
        if self.generator.output_dim() != self.discriminator.input_dim() {
            return Err(Error::shape(format!(
                "generator emits {} coordinates, critic reads {}",
                self.generator.output_dim(),
                self.discriminator.input_dim()
            )));
        }
        if self.discriminator.output_dim() != 1 {
            return Err(Error::shape("critic must have a single output"));
        }
        self.budget.validate()
    }

    pub fn enforce_budget(&mut self) {
        match self.enforcement {
            Enforcement::SpectralProjection => project_lipschitz(&mut self.discriminator, &self.budget),
            Enforcement::WeightClip { c } => clip_weights(&mut self.discriminator, c),
        }
    }

    /// `count` generator outputs from fresh standard-normal latents.
    pub fn generate(&self, count: usize, rng: &mut CounterRng) -> Result<Matrix> {
        let mut z = Matrix::zeros(count, self.latent_dim);
        rng.fill_normal(z.as_mut_slice());
        self.generator.forward_batch(&z)
    }

    /// Critic values, one per row.
    pub fn critic_values(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.discriminator.forward_batch(x)?.into_vec())
    }
}

/// `mean d(real) - mean d(g(noise))`.
pub fn critic_objective(model: &GanModel, real: &Matrix, noise: &Matrix) -> Result<f64> {
    if real.rows() == 0 || noise.rows() == 0 {
        return Err(Error::invalid("critic objective needs nonempty batches"));
    }
    let fake = model.generator.forward_batch(noise)?;
    critic_objective_on_samples(&model.discriminator, real, &fake)
}

/// `mean d(real) - mean d(fake)` with the fake samples given directly.
pub fn critic_objective_on_samples(d: &MlpParams, real: &Matrix, fake: &Matrix) -> Result<f64> {
    if real.rows() == 0 || fake.rows() == 0 {
        return Err(Error::invalid("critic objective needs nonempty batches"));
    }
    Ok(d.mean_output(real)? - d.mean_output(fake)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Critic,
    Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub phase: Phase,
    pub objective: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "phase", "objective"]).map_err(csv_io)?;
        for r in &self.rows {
            let phase = match r.phase {
                Phase::Critic => "critic",
                Phase::Generator => "generator",
            };
            w.write_record([r.step.to_string(), phase.to_string(), format!("{:?}", r.objective)])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Objectives of one phase, in step order.
    pub fn objectives(&self, phase: Phase) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| r.objective)
            .collect()
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

struct Trainer<'a> {
    model: GanModel,
    data: &'a Matrix,
    config: &'a TrainConfig,
    critic_adam: AdamState,
    gen_adam: AdamState,
    batch_rng: CounterRng,
    noise_rng: CounterRng,
    trace: LossTrace,
    step: usize,
    critic_steps: usize,
    gen_steps: usize,
}

impl Trainer<'_> {
    fn real_batch(&mut self) -> Matrix {
        let n = self.data.rows();
        let b = self.config.batch_size;
        let p = self.data.cols();
        let mut out = Matrix::zeros(b, p);
        match self.config.minibatch {
            Minibatch::Uniform => {
                for r in 0..b {
                    let t = self.batch_rng.below(n);
                    out.row_mut(r).copy_from_slice(self.data.row(t));
                }
            }
            Minibatch::Contiguous => {
                let start = self.batch_rng.below(n - b + 1);
                for r in 0..b {
                    out.row_mut(r).copy_from_slice(self.data.row(start + r));
                }
            }
        }
        out
    }

    fn noise_batch(&mut self) -> Matrix {
        let mut z = Matrix::zeros(self.config.batch_size, self.model.latent_dim);
        self.noise_rng.fill_normal(z.as_mut_slice());
        z
    }

    fn diverged(&self, err: Error) -> Error {
        match err {
            Error::Numeric { .. } => Error::Diverged {
                step: self.step,
                last_good: Box::new(self.model.clone()),
            },
            other => other,
        }
    }

    fn critic_update(&mut self) -> Result<()> {
        let real = self.real_batch();
        let z = self.noise_batch();
        let result = (|| {
            let fake = self.model.generator.forward_batch(&z)?;
            let d = &self.model.discriminator;
            let (out_r, cache_r) = d.forward_cached(&real)?;
            let (out_f, cache_f) = d.forward_cached(&fake)?;
            let b = real.rows() as f64;
            let objective = out_r.as_slice().iter().sum::<f64>() / b
                - out_f.as_slice().iter().sum::<f64>() / fake.rows() as f64;
            if !objective.is_finite() {
                return Err(Error::numeric("critic objective", "non-finite"));
            }
            // Ascend the objective: minimize its negation.
            let up_r = filled(out_r.rows(), -1.0 / b);
            let up_f = filled(out_f.rows(), 1.0 / fake.rows() as f64);
            let (mut grads, _) = d.backward(&cache_r, &up_r, false)?;
            let (gf, _) = d.backward(&cache_f, &up_f, false)?;
            add_grads(&mut grads, &gf);
            Ok((objective, grads))
        })();
        let (objective, grads) = result.map_err(|e| self.diverged(e))?;
        adam_step(&mut self.model.discriminator, &grads, &mut self.critic_adam)
            .map_err(|e| self.diverged(e))?;
        self.model.enforce_budget();
        self.trace.rows.push(TraceRow {
            step: self.step,
            phase: Phase::Critic,
            objective,
        });
        self.step += 1;
        self.critic_steps += 1;
        Ok(())
    }

    fn generator_update(&mut self) -> Result<()> {
        let real = self.real_batch();
        let z = self.noise_batch();
        let result = (|| {
            let g = &self.model.generator;
            let d = &self.model.discriminator;
            let (fake, cache_g) = g.forward_cached(&z)?;
            let (out_f, cache_f) = d.forward_cached(&fake)?;
            let m = fake.rows() as f64;
            let objective = d.mean_output(&real)? - out_f.as_slice().iter().sum::<f64>() / m;
            if !objective.is_finite() {
                return Err(Error::numeric("generator objective", "non-finite"));
            }
            // Descend the objective: its fake part is -mean d(g(z)).
            let up_f = filled(out_f.rows(), -1.0 / m);
            let (_, dx) = d.backward(&cache_f, &up_f, true)?;
            let dx = dx.expect("input gradient requested");
            let (grads, _) = g.backward(&cache_g, &dx, false)?;
            Ok((objective, grads))
        })();
        let (objective, grads) = result.map_err(|e| self.diverged(e))?;
        adam_step(&mut self.model.generator, &grads, &mut self.gen_adam)
            .map_err(|e| self.diverged(e))?;
        self.trace.rows.push(TraceRow {
            step: self.step,
            phase: Phase::Generator,
            objective,
        });
        self.step += 1;
        self.gen_steps += 1;
        Ok(())
    }
}

fn filled(rows: usize, v: f64) -> Matrix {
    Matrix::from_vec(rows, 1, vec![v; rows]).expect("column shape")
}

fn add_grads(acc: &mut ParamGrads, other: &ParamGrads) {
    for (a, b) in acc.layers.iter_mut().zip(&other.layers) {
        for (x, y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
            *x += y;
        }
        for (x, y) in a.bias.iter_mut().zip(&b.bias) {
            *x += y;
        }
    }
}

/// Trains on every row of `data`, recording `train_rows = [0, n)`.
pub fn train(
    model_init: &GanModel,
    data: &TimeSeriesMatrix,
    config: &TrainConfig,
    seed: u64,
) -> Result<(GanModel, LossTrace)> {
    train_on_rows(model_init, data, 0..data.len(), config, seed)
}

/// Trains on rows `rows` of `data`; the range is recorded in the provenance.
pub fn train_on_rows(
    model_init: &GanModel,
    data: &TimeSeriesMatrix,
    rows: std::ops::Range<usize>,
    config: &TrainConfig,
    seed: u64,
) -> Result<(GanModel, LossTrace)> {
    config.validate()?;
    model_init.validate()?;
    if data.dim() != model_init.data_dim() {
        return Err(Error::shape(format!(
            "series has {} columns, model expects {}",
            data.dim(),
            model_init.data_dim()
        )));
    }
    let slice = data.slice_rows(rows.clone())?;
    if slice.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "{} training rows is fewer than the batch size {}",
            slice.len(),
            config.batch_size
        )));
    }
    let model = model_init.clone();
    let critic_adam = AdamState::new(&model.discriminator, config.adam(config.critic_lr))?;
    let gen_adam = AdamState::new(&model.generator, config.adam(config.generator_lr))?;
    let mut trainer = Trainer {
        model,
        data: slice.data(),
        config,
        critic_adam,
        gen_adam,
        batch_rng: CounterRng::derived(seed, "train-batches", 0),
        noise_rng: CounterRng::derived(seed, "train-noise", 0),
        trace: LossTrace::default(),
        step: 0,
        critic_steps: 0,
        gen_steps: 0,
    };
    for _ in 0..config.warmup_critic_steps {
        trainer.critic_update()?;
    }
    for _ in 0..config.total_gen_steps {
        for _ in 0..config.critic_steps_per_gen {
            trainer.critic_update()?;
        }
        trainer.generator_update()?;
    }
    let Trainer {
        mut model,
        trace,
        critic_steps,
        gen_steps,
        ..
    } = trainer;
    let (prev_critic, prev_gen) = model_init
        .provenance
        .as_ref()
        .map_or((0, 0), |p| (p.critic_steps, p.generator_steps));
    model.provenance = Some(Provenance {
        seed,
        critic_steps: prev_critic + critic_steps,
        generator_steps: prev_gen + gen_steps,
        config_hash: config.digest(),
        schedule: config.clone(),
        train_rows: (rows.start, rows.end),
    });
    Ok((model, trace))
}

/// `count` rows `g(z)` with `z ~ N(0, I)`, deterministic in `seed`.
pub fn sample_generator(model: &GanModel, count: usize, seed: u64) -> Result<TimeSeriesMatrix> {
    if count == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut rng = CounterRng::derived(seed, "generator-samples", 0);
    let data = model.generate(count, &mut rng)?;
    TimeSeriesMatrix::new(
        data,
        SeriesMeta {
            seed: Some(seed),
            burn_in_dropped: 0,
            source: SeriesSource::Generated,
        },
    )
}

#[derive(Serialize, Deserialize)]
struct LatentRecord {
    dim: usize,
    law: String,
}

#[derive(Serialize, Deserialize)]
struct GanCheckpoint {
    format_version: u32,
    init_seed: u64,
    latent: LatentRecord,
    budget: LipschitzBudget,
    enforcement: Enforcement,
    generator: NetworkCheckpoint,
    discriminator: NetworkCheckpoint,
    provenance: Option<Provenance>,
}

impl GanModel {
    pub fn to_json(&self) -> String {
        let ck = GanCheckpoint {
            format_version: GAN_FORMAT_VERSION,
            init_seed: self.init_seed,
            latent: LatentRecord {
                dim: self.latent_dim,
                law: "standard_normal".into(),
            },
            budget: self.budget,
            enforcement: self.enforcement,
            generator: NetworkCheckpoint::from_params(&self.generator, Some(self.init_seed), None),
            discriminator: NetworkCheckpoint::from_params(
                &self.discriminator,
                Some(self.init_seed),
                Some(self.budget.k),
            ),
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&ck).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
        crate::nn::checkpoint_version_check(&doc, GAN_FORMAT_VERSION)?;
        let ck: GanCheckpoint =
            serde_json::from_value(doc).map_err(|e| Error::Corrupt(e.to_string()))?;
        if ck.latent.law != "standard_normal" {
            return Err(Error::Corrupt(format!("unknown latent law '{}'", ck.latent.law)));
        }
        let model = GanModel {
            generator: ck.generator.to_params()?,
            discriminator: ck.discriminator.to_params()?,
            latent_dim: ck.latent.dim,
            budget: ck.budget,
            enforcement: ck.enforcement,
            init_seed: ck.init_seed,
            provenance: ck.provenance,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save_checkpoint(model: &GanModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GanModel> {
    GanModel::from_json(&std::fs::read_to_string(path)?)
}
