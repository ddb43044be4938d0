use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `N` points in `R^m`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    pub values: DMatrix<f64>,
    pub label: String,
}

impl EmpiricalSample {
    pub fn new(values: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape("empirical sample must have at least one point and one column".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("empirical sample has non-finite entries".into()));
        }
        Ok(Self { values, label: label.into() })
    }

    pub fn from_rows(rows: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Shape("rows have different lengths".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]), label)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Sorted1d,
    Assignment,
    /// `converged` is false when `max_iters` ran out before the marginal
    /// violation reached the tolerance; the value is then still reported.
    Sinkhorn { epsilon: f64, iterations: usize, violation: f64, converged: bool },
    GaussianClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    /// Cost `|x - y|^2 / m` for points in `R^m`.
    PerPoint { m: usize },
}

/// A squared-W2 estimate. `squared` is always `true`: values are on the
/// `W_2^2` scale, never `W_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportEstimate {
    pub value: f64,
    pub squared: bool,
    pub estimator: Estimator,
    pub ci_low: f64,
    pub ci_high: f64,
    pub normalization: Normalization,
    pub samples: usize,
}

impl TransportEstimate {
    /// Point estimate with a degenerate interval.
    pub fn point(value: f64, estimator: Estimator, normalization: Normalization, samples: usize) -> Self {
        let value = value.max(0.0);
        Self { value, squared: true, estimator, ci_low: value, ci_high: value, normalization, samples }
    }

    /// Unsquared distance.
    pub fn distance(&self) -> f64 {
        self.value.sqrt()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major copy of the sample rows for cache-friendly cost assembly.
pub(crate) fn rows_of(values: &DMatrix<f64>) -> Vec<Vec<f64>> {
    values.row_iter().map(|r| r.iter().copied().collect()).collect()
}
