// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multivariate series: seeded simulators, CSV I/O and dependence diagnostics.

mod csv_io;
mod diagnostics;
mod simulate;

pub use csv_io::{load_csv, parse_csv, save_csv, write_csv};
pub use diagnostics::{
    coupling_decay_from_histories, gmc_coupling_decay, s_dependent_surrogate, tail_diagnostic,
    tail_diagnostic_on_grid, CoordinateTail, CouplingDecayReport, DecayFit, TailReport,
};
pub use simulate::{
    simulate_change_point, simulate_var, ChangePointSpec, InitSpec, NoiseSpec, VarSpec,
    MAX_SERIES_ROWS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSource {
    Simulated,
    Csv,
    Generated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub seed: Option<u64>,
    pub burn_in_dropped: usize,
    pub source: SeriesSource,
}

/// `n x p` observations; row `t` is `X_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesMatrix {
    data: Matrix,
    columns: Vec<String>,
    pub meta: SeriesMeta,
}

impl TimeSeriesMatrix {
    pub fn new(data: Matrix, meta: SeriesMeta) -> Result<Self> {
        let columns = default_columns(data.cols());
        Self::with_columns(data, columns, meta)
    }

    pub fn with_columns(data: Matrix, columns: Vec<String>, meta: SeriesMeta) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::invalid(format!(
                "series must have at least one row and column, got {}x{}",
                data.rows(),
                data.cols()
            )));
        }
        if columns.len() != data.cols() {
            return Err(Error::shape(format!(
                "{} column names for {} columns",
                columns.len(),
                data.cols()
            )));
        }
        if !data.is_finite() {
            return Err(Error::invalid("series contains non-finite values"));
        }
        Ok(Self {
            data,
            columns,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        self.data.row(t)
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Rows `range.start..range.end` as a new series with the same metadata.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.len() {
            return Err(Error::invalid(format!(
                "row range {range:?} invalid for a series of {} rows",
                self.len()
            )));
        }
        let p = self.dim();
        let data = self.data.as_slice()[range.start * p..range.end * p].to_vec();
        Ok(Self {
            data: Matrix::from_vec(range.len(), p, data)?,
            columns: self.columns.clone(),
            meta: self.meta.clone(),
        })
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim()];
        for t in 0..self.len() {
            for (mi, x) in m.iter_mut().zip(self.row(t)) {
                *mi += x;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

pub(crate) fn default_columns(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}
