//! Closed-form rate bounds, evaluated in the log domain.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::estimate::EmpiricalSample;
use crate::error::{Error, Result};
use crate::process::MonteCarloEstimate;
use crate::tensor::symmetric_spectrum;

/// Unspecified absolute constants, all defaulting to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Exponent constant in `C_d = d^{C d}`, and the `C` of the degree rule
    /// for general activations.
    pub c: f64,
    /// Prefactor of the `k^{-1/6}` term for general activations.
    pub c_prime: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { c: 1.0, c_prime: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `C_d max|a|^2 (n^{5d - 1/2}/k)^{1/3}` for a degree-`d` polynomial.
    Polynomial,
    /// `C_d n^{2.5d - 1.5}/k` for the monomial `x^d`.
    Monomial,
    /// `C' max|c_m|^2 / k^{1/6} + R(d(k))` for a general activation.
    General,
    /// `n^3/k`, the best possible rate for `x^2` (reported, not a bound).
    QuadraticReference,
}

impl BoundKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Polynomial => "polynomial",
            Self::Monomial => "monomial",
            Self::General => "general",
            Self::QuadraticReference => "quadratic_reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    pub n: usize,
    pub k: f64,
    pub d: Option<usize>,
    pub max_sq_coef: Option<f64>,
    pub max_sq_hermite: Option<f64>,
    pub remainder: Option<f64>,
    pub constants: BoundConstants,
    /// `ln C_d = C d ln d` where it applies.
    pub log_cd: f64,
    pub log_value: f64,
    /// Individual terms whose sum is the bound (a single entry for
    /// one-term bounds).
    pub summands: Vec<f64>,
}

impl BoundSpec {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

fn log_cd(d: usize, c: f64) -> f64 {
    if d <= 1 {
        0.0
    } else {
        c * d as f64 * (d as f64).ln()
    }
}

fn check(n: usize, k: f64, d: usize) -> Result<()> {
    if n == 0 || !(k > 0.0) || d == 0 {
        return Err(Error::InvalidParameter(format!("bound needs n, k, d positive (n={n}, k={k}, d={d})")));
    }
    Ok(())
}

/// Rate for a degree-`d` polynomial activation.
pub fn bound_theorem31(n: usize, k: f64, d: usize, max_sq_coef: f64, constants: BoundConstants) -> Result<BoundSpec> {
    check(n, k, d)?;
    let lcd = log_cd(d, constants.c);
    let log_value = lcd + max_sq_coef.ln() + ((5.0 * d as f64 - 0.5) * (n as f64).ln() - k.ln()) / 3.0;
    Ok(BoundSpec {
        kind: BoundKind::Polynomial,
        n,
        k,
        d: Some(d),
        max_sq_coef: Some(max_sq_coef),
        max_sq_hermite: None,
        remainder: None,
        constants,
        log_cd: lcd,
        log_value,
        summands: vec![log_value.exp()],
    })
}

/// Rate for the monomial activation `x^d`.
pub fn bound_theorem34(n: usize, k: f64, d: usize, constants: BoundConstants) -> Result<BoundSpec> {
    check(n, k, d)?;
    let lcd = log_cd(d, constants.c);
    let log_value = lcd + (2.5 * d as f64 - 1.5) * (n as f64).ln() - k.ln();
    Ok(BoundSpec {
        kind: BoundKind::Monomial,
        n,
        k,
        d: Some(d),
        max_sq_coef: Some(1.0),
        max_sq_hermite: None,
        remainder: None,
        constants,
        log_cd: lcd,
        log_value,
        summands: vec![log_value.exp()],
    })
}

/// `n^3 / k`.
pub fn quadratic_reference_rate(n: usize, k: f64) -> Result<BoundSpec> {
    check(n, k, 2)?;
    let log_value = 3.0 * (n as f64).ln() - k.ln();
    Ok(BoundSpec {
        kind: BoundKind::QuadraticReference,
        n,
        k,
        d: Some(2),
        max_sq_coef: Some(1.0),
        max_sq_hermite: None,
        remainder: None,
        constants: BoundConstants { c: 0.0, c_prime: 0.0 },
        log_cd: 0.0,
        log_value,
        summands: vec![log_value.exp()],
    })
}

/// Truncation degree `ceil(ln k / (100 C ln n ln ln k))`, at least 1.
pub fn general_activation_degree(n: usize, k: f64, c: f64) -> Result<usize> {
    if k < 16.0 {
        return Err(Error::InvalidParameter(format!("general activation bound needs k >= 16, got {k}")));
    }
    if n < 2 || !(c > 0.0) {
        return Err(Error::InvalidParameter("general activation bound needs n >= 2 and C > 0".into()));
    }
    let raw = k.ln() / (100.0 * c * (n as f64).ln() * k.ln().ln());
    Ok((raw.ceil() as usize).max(1))
}

/// `C' max|c_m|^2 / k^{1/6} + R(d)` with `d` from [`general_activation_degree`].
pub fn bound_theorem51(
    n: usize,
    k: f64,
    max_sq_hermite: f64,
    remainder_fn: &dyn Fn(usize) -> f64,
    constants: BoundConstants,
) -> Result<BoundSpec> {
    let d = general_activation_degree(n, k, constants.c)?;
    let first = constants.c_prime * max_sq_hermite * k.powf(-1.0 / 6.0);
    let remainder = remainder_fn(d);
    Ok(BoundSpec {
        kind: BoundKind::General,
        n,
        k,
        d: Some(d),
        max_sq_coef: None,
        max_sq_hermite: Some(max_sq_hermite),
        remainder: Some(remainder),
        constants,
        log_cd: 0.0,
        log_value: (first + remainder).ln(),
        summands: vec![first, remainder],
    })
}

/// Whitened copy of the rows: centered, rotated onto the range of the sample
/// covariance (eigenvalues above `1e-10` times the largest) and scaled to
/// identity covariance. The output has one column per retained direction.
pub fn whiten(values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rows = values.nrows();
    if rows < 2 {
        return Err(Error::Shape("whitening needs at least two rows".into()));
    }
    let mean = values.row_mean();
    let mut centered = values.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (rows as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    let s = symmetric_spectrum(&cov)?;
    let keep = s.values.iter().take_while(|&&l| l > 1e-10 * s.max()).count();
    let mut proj = DMatrix::zeros(values.ncols(), keep);
    for c in 0..keep {
        proj.set_column(c, &(s.vectors.column(c) / s.values[c].sqrt()));
    }
    Ok(centered * proj)
}

/// Monte Carlo estimate of `(sqrt N / k) ||E[Y Y^T |Y|^2]||_HS` from rows
/// `Y` in `R^N`, with a batch-means standard error.
pub fn bonis_rhs(features: &EmpiricalSample, k: f64) -> Result<MonteCarloEstimate> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let big_n = features.dim();
    let rows = features.len();
    let batches = if rows >= 40 { 20 } else { 1 };
    let per = rows / batches;
    let moment = |range: std::ops::Range<usize>| {
        let mut acc = DMatrix::zeros(big_n, big_n);
        for r in range.clone() {
            let y: DVector<f64> = features.values.row(r).transpose();
            acc += &y * y.transpose() * y.norm_squared();
        }
        acc / range.len() as f64
    };
    let factor = (big_n as f64).sqrt() / k;
    let mean = factor * moment(0..rows).norm();
    let stderr = if batches > 1 {
        let vals: Vec<f64> = (0..batches).map(|b| factor * moment(b * per..(b + 1) * per).norm()).collect();
        MonteCarloEstimate::from_values(&vals).stderr
    } else {
        f64::NAN
    };
    Ok(MonteCarloEstimate { mean, stderr, samples: rows })
}
