// SPDX-License-Identifier: MIT OR Apache-2.0

//! Empirical distances between point clouds: exact Wasserstein-1 via an
//! assignment solver, sliced Wasserstein-1, and the network (critic) distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{distance, dot, Matrix};
use crate::nn::MlpParams;
use crate::rng::CounterRng;
use crate::timeseries::TimeSeriesMatrix;

/// Largest equal-size instance solved exactly.
pub const EXACT_MAX_POINTS: usize = 2048;
pub const DEFAULT_PROJECTIONS: usize = 128;

/// Uniformly weighted point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    points: Matrix,
}

impl EmpiricalMeasure {
    pub fn new(points: Matrix) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        if !points.is_finite() {
            return Err(Error::invalid("empirical measure has non-finite entries"));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn from_series(series: &TimeSeriesMatrix) -> Self {
        Self {
            points: series.data().clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum W1Method {
    ExactAssignment,
    Sliced { n_projections: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Result {
    pub value: f64,
    #[serde(flatten)]
    pub method: W1Method,
    /// Exact mode: `matching[i]` is the point of `b` assigned to point `i`
    /// of `a`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<Vec<usize>>,
}

fn check_dims(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "measures live in dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Exact W1 between two equal-size empirical measures with Euclidean cost.
pub fn w1_exact(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<W1Result> {
    check_dims(a, b)?;
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "exact W1 needs equal sizes (got {} and {}); use sliced mode",
            a.len(),
            b.len()
        )));
    }
    if a.len() > EXACT_MAX_POINTS {
        return Err(Error::invalid(format!(
            "exact W1 is limited to {EXACT_MAX_POINTS} points (got {}); use sliced mode",
            a.len()
        )));
    }
    let n = a.len();
    let cost = Matrix::from_vec(
        n,
        n,
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| distance(a.point(i), b.point(j)))
            .collect(),
    )?;
    let matching = min_cost_assignment(&cost);
    let total: f64 = matching.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
    Ok(W1Result {
        value: total / n as f64,
        method: W1Method::ExactAssignment,
        matching: Some(matching),
    })
}

/// Hungarian algorithm with row/column potentials (shortest augmenting
/// paths), `O(n^3)`. Returns the column assigned to each row. Ties are
/// resolved toward the lowest column index.
pub fn min_cost_assignment(cost: &Matrix) -> Vec<usize> {
    let n = cost.rows();
    debug_assert_eq!(n, cost.cols());
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// 1D W1 between two samples: sorted L1 difference for equal sizes, the
/// quantile-function integral otherwise. Inputs are sorted in place.
pub fn w1_1d(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    w1_1d_sorted(a, b)
}

fn w1_1d_sorted(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == b.len() {
        return a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    // Integrate |F_a^{-1}(u) - F_b^{-1}(u)| over the merged breakpoints i/n, j/m.
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0.0;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        total += (next - prev) * (a[i] - b[j]).abs();
        prev = next;
        // Compare with cross-multiplication to stay exact at coincident breakpoints.
        let ca = (i + 1) * m;
        let cb = (j + 1) * n;
        if ca <= cb {
            i += 1;
        }
        if cb <= ca {
            j += 1;
        }
    }
    total
}

/// Sliced W1 averaged over `n_projections` seeded uniform directions.
pub fn w1_sliced(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    n_projections: usize,
    seed: u64,
) -> Result<W1Result> {
    check_dims(a, b)?;
    if n_projections == 0 {
        return Err(Error::invalid("sliced W1 needs at least one projection"));
    }
    let p = a.dim();
    let mut rng = CounterRng::derived(seed, "sliced-directions", 0);
    let mut dir = vec![0.0; p];
    let mut pa = vec![0.0; a.len()];
    let mut pb = vec![0.0; b.len()];
    let mut total = 0.0;
    for _ in 0..n_projections {
        loop {
            rng.fill_normal(&mut dir);
            let nrm = dot(&dir, &dir).sqrt();
            if nrm > 1e-12 {
                dir.iter_mut().for_each(|d| *d /= nrm);
                break;
            }
        }
        for (i, v) in pa.iter_mut().enumerate() {
            *v = dot(a.point(i), &dir);
        }
        for (i, v) in pb.iter_mut().enumerate() {
            *v = dot(b.point(i), &dir);
        }
        total += w1_1d(&mut pa, &mut pb);
    }
    Ok(W1Result {
        value: total / n_projections as f64,
        method: W1Method::Sliced {
            n_projections,
            seed,
        },
        matching: None,
    })
}

/// `mean_a d - mean_b d` for a scalar-output network `d`.
pub fn nn_distance(d: &MlpParams, a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    check_dims(a, b)?;
    if d.output_dim() != 1 {
        return Err(Error::shape(format!(
            "network distance needs a scalar critic, got {} outputs",
            d.output_dim()
        )));
    }
    Ok(d.mean_output(a.points())? - d.mean_output(b.points())?)
}
