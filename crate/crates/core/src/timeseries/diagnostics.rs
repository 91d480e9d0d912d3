// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dependence and tail diagnostics for simulated and observed series.

use serde::{Deserialize, Serialize};

use super::simulate::{series_rng, simulate_raw, simulate_var_raw, trim, VarSpec};
use super::{SeriesMeta, SeriesSource, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::linalg::{distance, norm, Matrix};
use crate::rng::CounterRng;

/// Points with `delta_n` at or below this value are left out of the fit.
pub const DECAY_FLOOR: f64 = 1e-12;
/// Points whose distance is within this fraction of the chain magnitude are
/// dominated by rounding and are left out of the fit as well.
pub const DECAY_RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `ln delta_n` against `n`.
    pub slope: f64,
    pub intercept: f64,
    pub first_step: usize,
    pub last_step: usize,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDecayReport {
    /// `delta_n = ||X_n - X'_n||` for `n = 0..=horizon`.
    pub distances: Vec<f64>,
    /// Absent when fewer than three distances clear the floor.
    pub fit: Option<DecayFit>,
    /// `Some(true)` when the fitted slope is below `-1e-6`.
    pub contracting: Option<bool>,
}

/// Runs two copies of the recursion with independent pasts and shared
/// innovations for `horizon` steps and fits the exponential decay rate of
/// their distance.
pub fn gmc_coupling_decay(spec: &VarSpec, horizon: usize, seed: u64) -> Result<CouplingDecayReport> {
    spec.validate()?;
    check_horizon(horizon)?;
    let q = spec.max_lag();
    let warm = spec.burn_in.max(1) + q;
    let past = |tag: &str| -> Vec<Vec<f64>> {
        let mut rng = CounterRng::derived(seed, tag, 0);
        let m = simulate_raw(
            spec.p,
            &spec.lag_coeffs,
            spec.init,
            spec.noise.cov_scale,
            warm,
            |_| &spec.noise.mean,
            &mut rng,
        );
        (warm - q..warm).map(|t| m.row(t).to_vec()).collect()
    };
    let a = past("gmc-past-a");
    let b = past("gmc-past-b");
    coupling_decay_from_histories(spec, &a, &b, horizon, seed)
}

/// Coupled run from explicit pre-histories. Each history holds the last
/// `q` rows in time order (oldest first).
pub fn coupling_decay_from_histories(
    spec: &VarSpec,
    history_a: &[Vec<f64>],
    history_b: &[Vec<f64>],
    horizon: usize,
    seed: u64,
) -> Result<CouplingDecayReport> {
    spec.validate()?;
    check_horizon(horizon)?;
    let q = spec.max_lag();
    let p = spec.p;
    for h in [history_a, history_b] {
        if h.len() != q || h.iter().any(|r| r.len() != p) {
            return Err(Error::shape(format!("pre-history must be {q} rows of length {p}")));
        }
    }
    let mut chain_a: Vec<Vec<f64>> = history_a.to_vec();
    let mut chain_b: Vec<Vec<f64>> = history_b.to_vec();
    let mut rng = CounterRng::derived(seed, "gmc-shared", 0);
    let sd = spec.noise.cov_scale.sqrt();
    let mut z = vec![0.0; p];

    let mut distances = Vec::with_capacity(horizon + 1);
    let mut scales = Vec::with_capacity(horizon + 1);
    let record = |a: &[f64], b: &[f64], d: &mut Vec<f64>, s: &mut Vec<f64>| {
        d.push(distance(a, b));
        s.push(1f64.max(norm(a)).max(norm(b)));
    };
    record(&chain_a[q - 1], &chain_b[q - 1], &mut distances, &mut scales);

    for _ in 0..horizon {
        rng.fill_normal(&mut z);
        for chain in [&mut chain_a, &mut chain_b] {
            let len = chain.len();
            let next: Vec<f64> = (0..p)
                .map(|c| {
                    let mut s = 0.0;
                    for (j, &a) in spec.lag_coeffs.iter().enumerate() {
                        s += a * chain[len - 1 - j][c];
                    }
                    s += spec.noise.mean[c];
                    if sd > 0.0 {
                        s += sd * z[c];
                    }
                    s
                })
                .collect();
            chain.push(next);
        }
        let n = chain_a.len() - 1;
        record(&chain_a[n], &chain_b[n], &mut distances, &mut scales);
    }

    let fit = fit_log_decay(&distances, &scales);
    let contracting = fit.as_ref().map(|f| f.slope < -1e-6);
    Ok(CouplingDecayReport {
        distances,
        fit,
        contracting,
    })
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 10 {
        return Err(Error::invalid(format!("horizon must be at least 10, got {horizon}")));
    }
    Ok(())
}

fn fit_log_decay(distances: &[f64], scales: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .zip(scales)
        .enumerate()
        .filter(|(_, (&d, &s))| d > DECAY_FLOOR && d > DECAY_RELATIVE_FLOOR * s)
        .map(|(n, (&d, _))| (n as f64, d.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(DecayFit {
        slope,
        intercept: my - slope * mx,
        first_step: pts[0].0 as usize,
        last_step: pts[pts.len() - 1].0 as usize,
        points: pts.len(),
    })
}

/// Restart-sampling stand-in for `E[X_i | eps_{i-s}, ..., eps_i]`.
///
/// Row `i` re-runs the recursion over the innovations `eps_{i-s}..eps_i` of
/// the `simulate_var(spec, seed)` run, starting from lags taken from an
/// independent copy of the process. Rows whose window reaches back to the
/// initial values reproduce the original series.
pub fn s_dependent_surrogate(spec: &VarSpec, s: usize, seed: u64) -> Result<TimeSeriesMatrix> {
    spec.validate()?;
    let q = spec.max_lag();
    if s < q {
        return Err(Error::invalid(format!(
            "window s = {s} is shorter than the maximum lag {q}"
        )));
    }
    let p = spec.p;
    let n_raw = spec.raw_len();
    let original = simulate_var_raw(spec, seed);
    // Innovations of the original run, re-derived from the same stream.
    let innovations = innovation_rows(spec, seed, n_raw);
    let mut copy_rng = CounterRng::derived(seed, "s-dependent-restart", 0);
    let copy = simulate_raw(
        p,
        &spec.lag_coeffs,
        spec.init,
        spec.noise.cov_scale,
        n_raw,
        |_| &spec.noise.mean,
        &mut copy_rng,
    );

    let mut out = Matrix::zeros(n_raw, p);
    let mut buf: Vec<Vec<f64>> = Vec::with_capacity(s + q + 1);
    for i in 0..n_raw {
        if i <= s + q {
            out.row_mut(i).copy_from_slice(original.row(i));
            continue;
        }
        let start = i - s;
        buf.clear();
        for t in start - q..start {
            buf.push(copy.row(t).to_vec());
        }
        for t in start..=i {
            let len = buf.len();
            let row: Vec<f64> = (0..p)
                .map(|c| {
                    let mut acc = 0.0;
                    for (j, &a) in spec.lag_coeffs.iter().enumerate() {
                        acc += a * buf[len - 1 - j][c];
                    }
                    acc + innovations.row(t)[c]
                })
                .collect();
            buf.push(row);
        }
        out.row_mut(i).copy_from_slice(&buf[buf.len() - 1]);
    }
    TimeSeriesMatrix::new(
        trim(out, spec.burn_in),
        SeriesMeta {
            seed: Some(seed),
            burn_in_dropped: spec.burn_in,
            source: SeriesSource::Generated,
        },
    )
}

/// `v_t = mean + sd * z_t` for every raw row, replaying the simulator stream.
fn innovation_rows(spec: &VarSpec, seed: u64, n_raw: usize) -> Matrix {
    let p = spec.p;
    let q = spec.max_lag();
    let mut rng = series_rng(seed);
    if let super::InitSpec::Uniform { .. } = spec.init {
        if q <= n_raw {
            for _ in 0..p {
                rng.uniform();
            }
        }
    }
    let sd = spec.noise.cov_scale.sqrt();
    let mut m = Matrix::zeros(n_raw, p);
    let mut z = vec![0.0; p];
    for t in q..n_raw {
        rng.fill_normal(&mut z);
        for c in 0..p {
            let mut v = spec.noise.mean[c];
            if sd > 0.0 {
                v += sd * z[c];
            }
            m.set(t, c, v);
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateTail {
    /// Robust scale (1.4826 * MAD, falling back to max |x| or 1).
    pub scale: f64,
    pub thresholds: Vec<f64>,
    /// Empirical `P(|x| >= a)` for each threshold.
    pub survival: Vec<f64>,
    /// Quadratic coefficient of `ln S(a)` fitted over the tail region;
    /// negative for Gaussian-like tails.
    pub log_survival_curvature: Option<f64>,
    /// Slope of `ln S(a)` against `ln a` over the tail region; tends to the
    /// tail index for power-law tails (-1 for Cauchy).
    pub log_log_slope: Option<f64>,
    pub heavy_tail: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    /// Threshold grid in units of each coordinate's robust scale.
    pub grid: Vec<f64>,
    pub coordinates: Vec<CoordinateTail>,
}

/// Default grid: 0.5, 1.0, ..., 8.0 robust-scale units.
pub fn default_tail_grid() -> Vec<f64> {
    (1..=16).map(|k| 0.5 * k as f64).collect()
}

pub fn tail_diagnostic(series: &TimeSeriesMatrix) -> Result<TailReport> {
    tail_diagnostic_on_grid(series, &default_tail_grid())
}

/// Empirical tail survival per coordinate. Informational; no pass/fail.
pub fn tail_diagnostic_on_grid(series: &TimeSeriesMatrix, grid: &[f64]) -> Result<TailReport> {
    if series.len() < 100 {
        return Err(Error::invalid(format!(
            "tail diagnostic needs at least 100 rows, got {}",
            series.len()
        )));
    }
    let n = series.len();
    let coordinates = (0..series.dim())
        .map(|c| {
            let mut abs: Vec<f64> = (0..n).map(|t| series.row(t)[c].abs()).collect();
            let col: Vec<f64> = (0..n).map(|t| series.row(t)[c]).collect();
            let scale = robust_scale(&col);
            abs.sort_by(f64::total_cmp);
            let thresholds: Vec<f64> = grid.iter().map(|g| g * scale).collect();
            let survival: Vec<f64> = thresholds
                .iter()
                .map(|&a| {
                    let below = abs.partition_point(|&v| v < a);
                    (n - below) as f64 / n as f64
                })
                .collect();
            let min_count = 5.0 / n as f64;
            let tail: Vec<(f64, f64)> = thresholds
                .iter()
                .zip(grid)
                .zip(&survival)
                .filter(|((_, &g), &s)| g >= 1.0 && s >= min_count)
                .map(|((&a, _), &s)| (a, s.ln()))
                .collect();
            let (curv, slope) = if tail.len() >= 3 {
                let curv = quadratic_coefficient(&tail);
                let logs: Vec<(f64, f64)> = tail.iter().map(|&(a, l)| (a.ln(), l)).collect();
                (Some(curv), Some(linear_slope(&logs)))
            } else {
                (None, None)
            };
            CoordinateTail {
                scale,
                thresholds,
                survival,
                log_survival_curvature: curv,
                log_log_slope: slope,
                heavy_tail: slope.map(|s| s > -2.0),
            }
        })
        .collect();
    Ok(TailReport {
        grid: grid.to_vec(),
        coordinates,
    })
}

fn robust_scale(col: &[f64]) -> f64 {
    let med = median(col);
    let dev: Vec<f64> = col.iter().map(|x| (x - med).abs()).collect();
    let mad = 1.4826 * median(&dev);
    if mad > 0.0 {
        return mad;
    }
    let m = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

/// Least-squares `c2` in `y = c0 + c1 x + c2 x^2`.
fn quadratic_coefficient(pts: &[(f64, f64)]) -> f64 {
    // Centering keeps the normal equations well conditioned.
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let (mut s2, mut s3, mut s4, mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let u = x - mx;
        s2 += u * u;
        s3 += u * u * u;
        s4 += u * u * u * u;
        t0 += y;
        t1 += u * y;
        t2 += u * u * y;
    }
    // Normal equations with s0 = m, s1 = 0.
    let a = [[m, 0.0, s2], [0.0, s2, s3], [s2, s3, s4]];
    let b = [t0, t1, t2];
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&a);
    let mut a2 = a;
    for (row, &bi) in a2.iter_mut().zip(&b) {
        row[2] = bi;
    }
    det(&a2) / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::{simulate_var, InitSpec, NoiseSpec};

    fn ar1(a: f64, cov_scale: f64) -> VarSpec {
        VarSpec {
            p: 1,
            lag_coeffs: vec![a],
            noise: NoiseSpec {
                mean: vec![0.0],
                cov_scale,
            },
            init: InitSpec::Zeros,
            burn_in: 100,
            n_keep: 500,
        }
    }

    #[test]
    fn analytic_contraction_from_unit_offset() {
        let spec = ar1(0.5, 0.0);
        let r = coupling_decay_from_histories(&spec, &[vec![1.0]], &[vec![0.0]], 60, 1).unwrap();
        for (n, d) in r.distances.iter().enumerate() {
            assert_eq!(*d, 0.5f64.powi(n as i32));
        }
        let fit = r.fit.unwrap();
        assert!((fit.slope - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn shared_noise_unit_offset() {
        let spec = ar1(0.5, 1.0);
        let r = coupling_decay_from_histories(&spec, &[vec![1.0]], &[vec![0.0]], 200, 3).unwrap();
        assert!((r.fit.unwrap().slope - 0.5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn stable_ar1_slopes() {
        for (i, a) in [0.9, 0.5, -0.3, 0.75].into_iter().enumerate() {
            let r = gmc_coupling_decay(&ar1(a, 1.0), 200, i as u64).unwrap();
            let fit = r.fit.unwrap();
            assert!((fit.slope - f64::ln(a.abs())).abs() < 1e-6, "a={a} slope={}", fit.slope);
            assert_eq!(r.contracting, Some(true));
        }
    }

    #[test]
    fn random_walk_does_not_contract() {
        let r = gmc_coupling_decay(&ar1(1.0, 1.0), 200, 7).unwrap();
        assert!(r.fit.as_ref().unwrap().slope >= -1e-6);
        assert_eq!(r.contracting, Some(false));
    }

    #[test]
    fn identical_chains_have_no_fit() {
        let spec = ar1(0.5, 1.0);
        let r = coupling_decay_from_histories(&spec, &[vec![2.0]], &[vec![2.0]], 20, 3).unwrap();
        assert!(r.fit.is_none());
        assert!(r.distances.iter().all(|&d| d == 0.0));
        assert!(gmc_coupling_decay(&spec, 5, 0).is_err());
    }

    #[test]
    fn full_window_surrogate_is_the_series() {
        let mut spec = ar1(0.5, 1.0);
        spec.n_keep = 50;
        spec.burn_in = 10;
        let sur = s_dependent_surrogate(&spec, 1000, 5).unwrap();
        let orig = simulate_var(&spec, 5).unwrap();
        assert_eq!(sur.data(), orig.data());
    }

    #[test]
    fn surrogate_error_decays_geometrically() {
        let mut spec = ar1(0.5, 1.0);
        spec.n_keep = 400;
        let orig = simulate_var(&spec, 8).unwrap();
        for s in [2usize, 4, 8, 12] {
            let sur = s_dependent_surrogate(&spec, s, 8).unwrap();
            let err: f64 = (0..orig.len())
                .map(|t| (orig.row(t)[0] - sur.row(t)[0]).abs())
                .sum::<f64>()
                / orig.len() as f64;
            // E|X - X'| for two independent stationary copies is
            // 2 / sqrt(pi) * sigma with sigma^2 = 1 / (1 - a^2); the
            // restart error is that times 0.5^(s+1). Allow a factor 3.
            let bound = 3.0 * 2.0 / std::f64::consts::PI.sqrt() * (1.0f64 / 0.75).sqrt()
                * 0.5f64.powi(s as i32 + 1);
            assert!(err <= bound, "s={s} err={err} bound={bound}");
        }
    }

    #[test]
    fn minimal_window_hand_trace() {
        // a = 0.5, no noise, mean 1, x_0 ~ U(0, 1). With s = 1 and q = 1,
        // rows 0..=2 reproduce the original and row i >= 3 restarts from the
        // independent copy two steps back:
        //   x~_i = 0.5 * (0.5 * copy_{i-2} + 1) + 1 = 0.25 * copy_{i-2} + 1.5
        // where copy_t = 2 + (u' - 2) * 0.5^t.
        let spec = VarSpec {
            p: 1,
            lag_coeffs: vec![0.5],
            noise: NoiseSpec {
                mean: vec![1.0],
                cov_scale: 0.0,
            },
            init: InitSpec::Uniform { lo: 0.0, hi: 1.0 },
            burn_in: 0,
            n_keep: 6,
        };
        let seed = 21;
        let orig = simulate_var(&spec, seed).unwrap();
        let u_copy = CounterRng::derived(seed, "s-dependent-restart", 0).uniform_range(0.0, 1.0);
        let copy = |t: i32| 2.0 + (u_copy - 2.0) * 0.5f64.powi(t);
        let sur = s_dependent_surrogate(&spec, 1, seed).unwrap();
        for t in 0..3 {
            assert_eq!(sur.row(t)[0], orig.row(t)[0]);
        }
        for t in 3..6 {
            let expected = 0.25 * copy(t as i32 - 2) + 1.5;
            assert!((sur.row(t)[0] - expected).abs() < 1e-15, "t={t}");
        }
        let two_lags = VarSpec {
            lag_coeffs: vec![0.5, 0.1],
            ..spec
        };
        assert!(s_dependent_surrogate(&two_lags, 1, 0).is_err());
    }

    #[test]
    fn constant_series_tail() {
        let data = Matrix::from_vec(200, 1, vec![3.0; 200]).unwrap();
        let s = TimeSeriesMatrix::new(
            data,
            SeriesMeta {
                seed: None,
                burn_in_dropped: 0,
                source: SeriesSource::Csv,
            },
        )
        .unwrap();
        let r = tail_diagnostic(&s).unwrap();
        let c = &r.coordinates[0];
        for (&a, &sv) in c.thresholds.iter().zip(&c.survival) {
            if a > 3.0 {
                assert_eq!(sv, 0.0);
            } else {
                assert_eq!(sv, 1.0);
            }
        }
    }
}
