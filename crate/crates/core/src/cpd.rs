// SPDX-License-Identifier: MIT OR Apache-2.0

//! Single change-point detection with a trained generator/critic pair.
//!
//! Stage 1 (training on rows `0..t`) happens elsewhere. Stage 2 splits rows
//! `t..n` into blocks of `K`, scores each block by
//! `l_i = mean_{B_i} d(X) - mean d(g(z))` over `|B_i|` fresh latents, and
//! picks the adjacent pair with the largest `|l_{i+1} - l_i|`. Stage 3 slides
//! a window of radius `w` over the merged pair `G`, scores
//! `pi_j = mean_{H_j} d(X) - mean d(g(z))`, and reports the position with the
//! largest jump `pi_j - pi_{j-1}`.
//!
//! Row indices are 0-based. Block and window positions (`selected_k`,
//! `j_star`) are 1-based, so the estimate is `G.start + j_star - 1`.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::GanModel;
use crate::linalg::Matrix;
use crate::rng::CounterRng;
use crate::timeseries::TimeSeriesMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpRule {
    /// `pi_j - pi_{j-1}`, which only responds to increases of the loss.
    Signed,
    /// `|pi_j - pi_{j-1}|`.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FakeDraws {
    /// Independent latents for every block and every window.
    Fresh,
    /// One pool per stage; each block or window uses its leading entries.
    SharedPool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    /// Rows `0..t` trained the model; detection scans `t..n`.
    pub t: usize,
    pub block_size: usize,
    pub window_radius: usize,
    /// Declare "no change" when the largest stage-3 jump falls below this.
    pub threshold: Option<f64>,
    pub seed: u64,
    pub jump_rule: JumpRule,
    pub fake_draws: FakeDraws,
    pub execution: Execution,
    /// Skip the check that the model was trained outside `t..n`.
    pub allow_training_overlap: bool,
}

impl CpdConfig {
    pub fn new(t: usize, block_size: usize, window_radius: usize, seed: u64) -> Self {
        Self {
            t,
            block_size,
            window_radius,
            threshold: None,
            seed,
            jump_rule: JumpRule::Signed,
            fake_draws: FakeDraws::Fresh,
            execution: Execution::Serial,
            allow_training_overlap: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.t < 1 || self.t >= n {
            return Err(Error::invalid(format!(
                "training prefix t = {} must satisfy 1 <= t < n = {n}",
                self.t
            )));
        }
        if self.block_size < 2 {
            return Err(Error::invalid("block size must be at least 2"));
        }
        if self.window_radius < 1 {
            return Err(Error::invalid("window radius must be at least 1"));
        }
        if self.block_size <= self.window_radius {
            return Err(Error::invalid(format!(
                "block size {} must exceed the window radius {}",
                self.block_size, self.window_radius
            )));
        }
        if let Some(th) = self.threshold {
            if !(th >= 0.0 && th.is_finite()) {
                return Err(Error::invalid("threshold must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockLossProfile {
    pub losses: Vec<f64>,
    /// Half-open global row ranges `[start, end)`, tiling `t..n`.
    pub block_bounds: Vec<(usize, usize)>,
    /// `|l_{i+1} - l_i|` for `i = 1..len-1`.
    pub differences: Vec<f64>,
    /// 1-based index `k` of the first block of the selected pair.
    pub selected_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub profile: BlockLossProfile,
    /// Global `[start, end)` of `G = B_k + B_{k+1}`.
    pub merged_group_bounds: (usize, usize),
    pub pi: Vec<f64>,
    /// Jump statistic for `j = 2..=|G|`.
    pub jumps: Vec<f64>,
    /// 1-based position in `G`.
    pub j_star: usize,
    pub max_jump: f64,
    pub global_change_estimate: usize,
    pub declared: bool,
    pub config: CpdConfig,
    pub series_len: usize,
}

/// Block partition of `t..n`; a trailing block shorter than 2 rows is
/// merged into its predecessor.
pub fn block_partition(t: usize, n: usize, block_size: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::new();
    let mut start = t;
    while start < n {
        let end = (start + block_size).min(n);
        bounds.push((start, end));
        start = end;
    }
    if bounds.len() >= 2 {
        let (s, e) = bounds[bounds.len() - 1];
        if e - s < 2 {
            bounds.pop();
            bounds.last_mut().expect("non-empty").1 = e;
        }
    }
    bounds
}

fn check_guard(model: &GanModel, n: usize, config: &CpdConfig) -> Result<()> {
    if config.allow_training_overlap {
        return Ok(());
    }
    if let Some(p) = &model.provenance {
        let (s, e) = p.train_rows;
        if s < n && e > config.t {
            return Err(Error::invalid(format!(
                "model was trained on rows [{s}, {e}), which overlap the detection range [{}, {n}); \
                 pass --allow-training-overlap to override",
                config.t
            )));
        }
    }
    Ok(())
}

/// Mean of `d(g(z))` over `count` latents from `rng`.
fn fake_mean(model: &GanModel, count: usize, rng: &mut CounterRng) -> Result<f64> {
    let fake = model.generate(count, rng)?;
    model.discriminator.mean_output(&fake)
}

/// Critic values of the pooled fakes, so a prefix mean can be read off.
fn fake_pool(model: &GanModel, count: usize, rng: &mut CounterRng) -> Result<Vec<f64>> {
    let fake = model.generate(count, rng)?;
    model.critic_values(&fake)
}

fn prefix_mean(v: &[f64], count: usize) -> f64 {
    v[..count].iter().sum::<f64>() / count as f64
}

fn map_indices<F>(len: usize, exec: Execution, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    match exec {
        Execution::Serial => (0..len).map(f).collect(),
        Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Stage 2.
pub fn block_losses(
    model: &GanModel,
    series: &TimeSeriesMatrix,
    config: &CpdConfig,
) -> Result<BlockLossProfile> {
    let n = series.len();
    config.validate(n)?;
    check_guard(model, n, config)?;
    if series.dim() != model.data_dim() {
        return Err(Error::shape(format!(
            "series has {} columns, model expects {}",
            series.dim(),
            model.data_dim()
        )));
    }
    let bounds = block_partition(config.t, n, config.block_size);
    if bounds.len() < 2 {
        return Err(Error::invalid(format!(
            "rows {}..{n} form fewer than two blocks of size {}",
            config.t, config.block_size
        )));
    }
    let tail = series.slice_rows(config.t..n)?;
    let d_real = model.critic_values(tail.data())?;
    let real_mean = |(s, e): (usize, usize)| {
        d_real[s - config.t..e - config.t].iter().sum::<f64>() / (e - s) as f64
    };
    let pool = match config.fake_draws {
        FakeDraws::SharedPool => {
            let largest = bounds.iter().map(|(s, e)| e - s).max().unwrap_or(0);
            let mut rng = CounterRng::derived(config.seed, "block-pool", 0);
            Some(fake_pool(model, largest, &mut rng)?)
        }
        FakeDraws::Fresh => None,
    };
    let losses = map_indices(bounds.len(), config.execution, |i| {
        let (s, e) = bounds[i];
        let fake = match &pool {
            Some(pool) => prefix_mean(pool, e - s),
            None => {
                let mut rng = CounterRng::derived(config.seed, "block", i as u64);
                fake_mean(model, e - s, &mut rng)?
            }
        };
        Ok(real_mean((s, e)) - fake)
    })?;
    let differences: Vec<f64> = losses.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let selected_k = argmax_first(&differences) + 1;
    Ok(BlockLossProfile {
        losses,
        block_bounds: bounds,
        differences,
        selected_k,
    })
}

/// Stage 3 window losses over the rows of `group`. Windows are clamped at the
/// edges of the group and averaged over their actual size.
pub fn rolling_window_losses(
    model: &GanModel,
    group: &Matrix,
    config: &CpdConfig,
) -> Result<Vec<f64>> {
    let w = config.window_radius;
    let len = group.rows();
    if len < 2 * w + 1 {
        return Err(Error::invalid(format!(
            "group of {len} rows is shorter than a full window of {}",
            2 * w + 1
        )));
    }
    let d_real = model.critic_values(group)?;
    let pool = match config.fake_draws {
        FakeDraws::SharedPool => {
            let mut rng = CounterRng::derived(config.seed, "window-pool", 0);
            Some(fake_pool(model, 2 * w + 1, &mut rng)?)
        }
        FakeDraws::Fresh => None,
    };
    map_indices(len, config.execution, |j| {
        let lo = j.saturating_sub(w);
        let hi = (j + w).min(len - 1);
        let size = hi - lo + 1;
        let real = d_real[lo..=hi].iter().sum::<f64>() / size as f64;
        let fake = match &pool {
            Some(pool) => prefix_mean(pool, size),
            None => {
                let mut rng = CounterRng::derived(config.seed, "window", j as u64);
                fake_mean(model, size, &mut rng)?
            }
        };
        Ok(real - fake)
    })
}

/// Runs stages 2 and 3 and maps the detected position back to a row index.
pub fn detect(
    model: &GanModel,
    series: &TimeSeriesMatrix,
    config: &CpdConfig,
) -> Result<DetectionReport> {
    let profile = block_losses(model, series, config)?;
    let k = profile.selected_k;
    let start = profile.block_bounds[k - 1].0;
    let end = profile.block_bounds[k].1;
    let group = series.slice_rows(start..end)?;
    let pi = rolling_window_losses(model, group.data(), config)?;
    let jumps: Vec<f64> = pi
        .windows(2)
        .map(|w| match config.jump_rule {
            JumpRule::Signed => w[1] - w[0],
            JumpRule::Absolute => (w[1] - w[0]).abs(),
        })
        .collect();
    let best = argmax_first(&jumps);
    let j_star = best + 2;
    let max_jump = jumps[best];
    let declared = config.threshold.is_none_or(|th| max_jump >= th);
    Ok(DetectionReport {
        profile,
        merged_group_bounds: (start, end),
        pi,
        jumps,
        j_star,
        max_jump,
        global_change_estimate: start + j_star - 1,
        declared,
        config: config.clone(),
        series_len: series.len(),
    })
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `index,global_index,value` rows for the stage-2 block losses.
    pub fn write_block_csv<W: Write>(&self, out: W) -> Result<()> {
        let rows = self
            .profile
            .losses
            .iter()
            .zip(&self.profile.block_bounds)
            .enumerate()
            .map(|(i, (&l, &(s, _)))| (i + 1, s, l));
        write_plot_csv(out, rows)
    }

    /// `index,global_index,value` rows for the stage-3 window losses.
    pub fn write_window_csv<W: Write>(&self, out: W) -> Result<()> {
        let start = self.merged_group_bounds.0;
        let rows = self.pi.iter().enumerate().map(|(j, &v)| (j + 1, start + j, v));
        write_plot_csv(out, rows)
    }

    pub fn save_plots(&self, block_path: &Path, window_path: &Path) -> Result<()> {
        self.write_block_csv(std::io::BufWriter::new(std::fs::File::create(block_path)?))?;
        self.write_window_csv(std::io::BufWriter::new(std::fs::File::create(window_path)?))
    }
}

fn write_plot_csv<W: Write>(
    mut out: W,
    rows: impl Iterator<Item = (usize, usize, f64)>,
) -> Result<()> {
    writeln!(out, "index,global_index,value")?;
    for (i, g, v) in rows {
        writeln!(out, "{i},{g},{v:?}")?;
    }
    out.flush()?;
    Ok(())
}
