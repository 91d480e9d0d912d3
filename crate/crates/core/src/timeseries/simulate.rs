// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scalar-coefficient VAR recursions `x_t = sum_j a_j x_{t-j} + v_t`,
//! `v_t ~ N(mean_t, cov_scale * I)`.
//!
//! Indices are 0-based raw positions. The first `q` raw rows are the initial
//! values; the recursion fills rows `q..`. Rows `0..burn_in` are dropped.

use serde::{Deserialize, Serialize};

use super::{SeriesMeta, SeriesSource, TimeSeriesMatrix};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::CounterRng;

/// Upper bound on raw rows (burn-in included) for one simulation.
pub const MAX_SERIES_ROWS: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mean: Vec<f64>,
    /// Innovation covariance is `cov_scale * I`. Zero disables the Gaussian
    /// part, leaving the deterministic mean.
    pub cov_scale: f64,
}

/// Initial values of the recursion. With `Uniform`, the most recent initial
/// row is drawn per coordinate from `U(lo, hi)` and earlier ones are zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Zeros,
    Uniform { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub p: usize,
    pub lag_coeffs: Vec<f64>,
    pub noise: NoiseSpec,
    pub init: InitSpec,
    pub burn_in: usize,
    pub n_keep: usize,
}

impl VarSpec {
    pub fn max_lag(&self) -> usize {
        self.lag_coeffs.len()
    }

    pub fn raw_len(&self) -> usize {
        self.burn_in + self.n_keep
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.p,
            &self.lag_coeffs,
            self.noise.cov_scale,
            &self.init,
            self.burn_in,
            self.n_keep,
        )?;
        check_mean("noise mean", &self.noise.mean, self.p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePointSpec {
    pub p: usize,
    pub lag_coeffs: Vec<f64>,
    pub cov_scale: f64,
    pub pre_mean: Vec<f64>,
    pub post_mean: Vec<f64>,
    pub init: InitSpec,
    pub burn_in: usize,
    pub n_keep: usize,
    /// First raw index whose innovation uses `post_mean`.
    pub change_at_raw: usize,
}

impl ChangePointSpec {
    pub fn validate(&self) -> Result<()> {
        validate_common(
            self.p,
            &self.lag_coeffs,
            self.cov_scale,
            &self.init,
            self.burn_in,
            self.n_keep,
        )?;
        check_mean("pre-change mean", &self.pre_mean, self.p)?;
        check_mean("post-change mean", &self.post_mean, self.p)?;
        if self.change_at_raw <= self.burn_in {
            return Err(Error::invalid(format!(
                "change index {} must come after the burn-in of {}",
                self.change_at_raw, self.burn_in
            )));
        }
        if self.change_at_raw >= self.burn_in + self.n_keep {
            return Err(Error::invalid(format!(
                "change index {} lies beyond the {} simulated rows",
                self.change_at_raw,
                self.burn_in + self.n_keep
            )));
        }
        Ok(())
    }

    /// Change index after the burn-in rows are removed.
    pub fn true_change_index(&self) -> usize {
        self.change_at_raw - self.burn_in
    }

    /// The same recursion with the pre-change mean throughout.
    pub fn without_change(&self) -> VarSpec {
        VarSpec {
            p: self.p,
            lag_coeffs: self.lag_coeffs.clone(),
            noise: NoiseSpec {
                mean: self.pre_mean.clone(),
                cov_scale: self.cov_scale,
            },
            init: self.init,
            burn_in: self.burn_in,
            n_keep: self.n_keep,
        }
    }
}

fn validate_common(
    p: usize,
    coeffs: &[f64],
    cov_scale: f64,
    init: &InitSpec,
    burn_in: usize,
    n_keep: usize,
) -> Result<()> {
    if p == 0 {
        return Err(Error::invalid("dimension p must be positive"));
    }
    if coeffs.is_empty() {
        return Err(Error::invalid("at least one lag coefficient is required"));
    }
    if coeffs.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("lag coefficients must be finite"));
    }
    if !(cov_scale >= 0.0 && cov_scale.is_finite()) {
        return Err(Error::invalid(format!(
            "covariance scale must be finite and nonnegative, got {cov_scale}"
        )));
    }
    if let InitSpec::Uniform { lo, hi } = init {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("invalid uniform init [{lo}, {hi}]")));
        }
    }
    if n_keep == 0 {
        return Err(Error::invalid("n_keep must be positive"));
    }
    match burn_in.checked_add(n_keep) {
        Some(total) if total <= MAX_SERIES_ROWS => Ok(()),
        _ => Err(Error::invalid(format!(
            "burn_in + n_keep exceeds the limit of {MAX_SERIES_ROWS} rows"
        ))),
    }
}

fn check_mean(what: &str, mean: &[f64], p: usize) -> Result<()> {
    if mean.len() != p {
        return Err(Error::shape(format!(
            "{what} has {} entries, expected {p}",
            mean.len()
        )));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid(format!("{what} must be finite")));
    }
    Ok(())
}

/// Raw recursion output, `n_raw x p`. `mean_at(t)` gives the innovation mean
/// for raw row `t`.
pub(crate) fn simulate_raw<'a>(
    p: usize,
    coeffs: &[f64],
    init: InitSpec,
    cov_scale: f64,
    n_raw: usize,
    mean_at: impl Fn(usize) -> &'a [f64],
    rng: &mut CounterRng,
) -> Matrix {
    let q = coeffs.len();
    let mut x = Matrix::zeros(n_raw, p);
    if let InitSpec::Uniform { lo, hi } = init {
        if q <= n_raw {
            let row = x.row_mut(q - 1);
            for v in row.iter_mut() {
                *v = rng.uniform_range(lo, hi);
            }
        }
    }
    let sd = cov_scale.sqrt();
    let mut z = vec![0.0; p];
    for t in q..n_raw {
        rng.fill_normal(&mut z);
        let mean = mean_at(t);
        let data = x.as_mut_slice();
        let (past, rest) = data.split_at_mut(t * p);
        let out = &mut rest[..p];
        for c in 0..p {
            let mut s = 0.0;
            for (j, &a) in coeffs.iter().enumerate() {
                s += a * past[(t - 1 - j) * p + c];
            }
            s += mean[c];
            if sd > 0.0 {
                s += sd * z[c];
            }
            out[c] = s;
        }
    }
    x
}

pub(crate) fn trim(raw: Matrix, burn_in: usize) -> Matrix {
    let p = raw.cols();
    let n = raw.rows();
    let data = raw.into_vec()[burn_in * p..].to_vec();
    Matrix::from_vec(n - burn_in, p, data).expect("trimmed shape is consistent")
}

pub(crate) fn series_rng(seed: u64) -> CounterRng {
    CounterRng::derived(seed, "series", 0)
}

/// Simulates the VAR and drops the burn-in rows.
pub fn simulate_var(spec: &VarSpec, seed: u64) -> Result<TimeSeriesMatrix> {
    spec.validate()?;
    let raw = simulate_var_raw(spec, seed);
    TimeSeriesMatrix::new(
        trim(raw, spec.burn_in),
        SeriesMeta {
            seed: Some(seed),
            burn_in_dropped: spec.burn_in,
            source: SeriesSource::Simulated,
        },
    )
}

/// Untrimmed simulation, burn-in rows included.
pub(crate) fn simulate_var_raw(spec: &VarSpec, seed: u64) -> Matrix {
    let mut rng = series_rng(seed);
    simulate_raw(
        spec.p,
        &spec.lag_coeffs,
        spec.init,
        spec.noise.cov_scale,
        spec.raw_len(),
        |_| &spec.noise.mean,
        &mut rng,
    )
}

/// Simulates a series whose innovation mean switches at `change_at_raw`.
/// Returns the trimmed series and the post-trim change index.
pub fn simulate_change_point(
    spec: &ChangePointSpec,
    seed: u64,
) -> Result<(TimeSeriesMatrix, usize)> {
    spec.validate()?;
    let mut rng = series_rng(seed);
    let raw = simulate_raw(
        spec.p,
        &spec.lag_coeffs,
        spec.init,
        spec.cov_scale,
        spec.burn_in + spec.n_keep,
        |t| {
            if t >= spec.change_at_raw {
                &spec.post_mean
            } else {
                &spec.pre_mean
            }
        },
        &mut rng,
    );
    let series = TimeSeriesMatrix::new(
        trim(raw, spec.burn_in),
        SeriesMeta {
            seed: Some(seed),
            burn_in_dropped: spec.burn_in,
            source: SeriesSource::Simulated,
        },
    )?;
    Ok((series, spec.true_change_index()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ar1(a: f64, cov_scale: f64, init: InitSpec, n: usize) -> VarSpec {
        VarSpec {
            p: 1,
            lag_coeffs: vec![a],
            noise: NoiseSpec {
                mean: vec![0.0],
                cov_scale,
            },
            init,
            burn_in: 0,
            n_keep: n,
        }
    }

    #[test]
    fn zero_noise_zero_init_is_zero() {
        let spec = VarSpec {
            p: 3,
            lag_coeffs: vec![1.0, -0.01, -0.5],
            noise: NoiseSpec {
                mean: vec![0.0; 3],
                cov_scale: 0.0,
            },
            init: InitSpec::Zeros,
            burn_in: 5,
            n_keep: 50,
        };
        let s = simulate_var(&spec, 1).unwrap();
        assert!(s.data().as_slice().iter().all(|&v| v == 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn geometric_recursion() {
        let spec = ar1(0.5, 0.0, InitSpec::Uniform { lo: 1.0, hi: 1.0 }, 8);
        let s = simulate_var(&spec, 1).unwrap();
        let got: Vec<f64> = (0..8).map(|t| s.row(t)[0]).collect();
        let expected: Vec<f64> = (0..8).map(|k| 0.5f64.powi(k)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn burn_in_rows_are_dropped() {
        let mut spec = ar1(0.7, 1.0, InitSpec::Zeros, 40);
        spec.burn_in = 15;
        let trimmed = simulate_var(&spec, 9).unwrap();
        let raw = simulate_var_raw(&spec, 9);
        assert_eq!(trimmed.len(), 40);
        for t in 0..40 {
            assert_eq!(trimmed.row(t), raw.row(t + 15));
        }
    }

    #[test]
    fn seed_determinism() {
        let spec = ar1(0.3, 1.0, InitSpec::Zeros, 100);
        assert_eq!(simulate_var(&spec, 4).unwrap(), simulate_var(&spec, 4).unwrap());
        assert_ne!(simulate_var(&spec, 4).unwrap(), simulate_var(&spec, 5).unwrap());
    }

    fn toy_cp(pre: f64, post: f64) -> ChangePointSpec {
        ChangePointSpec {
            p: 1,
            lag_coeffs: vec![0.6, -0.5],
            cov_scale: 1.0,
            pre_mean: vec![pre],
            post_mean: vec![post],
            init: InitSpec::Zeros,
            burn_in: 50,
            n_keep: 200,
            change_at_raw: 150,
        }
    }

    #[test]
    fn degenerate_change_matches_plain_run() {
        let spec = toy_cp(0.3, 0.3);
        let (s, idx) = simulate_change_point(&spec, 12).unwrap();
        assert_eq!(idx, 100);
        let plain = simulate_var(&spec.without_change(), 12).unwrap();
        assert_eq!(s.data(), plain.data());
    }

    #[test]
    fn mean_shift_is_visible() {
        // Stationary mean is mu / (1 - 0.6 + 0.5) = mu / 0.9, so the level
        // moves by about 11.1 after the change.
        let spec = toy_cp(0.0, 10.0);
        let (s, idx) = simulate_change_point(&spec, 3).unwrap();
        assert_eq!(idx, 100);
        let pre = s.slice_rows(0..80).unwrap().mean()[0];
        let post = s.slice_rows(120..200).unwrap().mean()[0];
        assert!(post - pre > 5.0, "pre {pre} post {post}");
    }

    #[test]
    fn validation_errors() {
        let mut spec = ar1(0.5, 1.0, InitSpec::Zeros, 10);
        spec.n_keep = MAX_SERIES_ROWS;
        spec.burn_in = 1;
        assert!(matches!(simulate_var(&spec, 0), Err(Error::Validation(_))));
        let mut cp = toy_cp(0.0, 1.0);
        cp.change_at_raw = 10;
        assert!(simulate_change_point(&cp, 0).is_err());
        let mut bad = ar1(0.5, 1.0, InitSpec::Zeros, 10);
        bad.noise.mean = vec![0.0, 1.0];
        assert!(matches!(simulate_var(&bad, 0), Err(Error::Shape(_))));
    }
}
