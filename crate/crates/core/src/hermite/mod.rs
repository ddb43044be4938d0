//! Hermite analysis of activation functions.
//!
//! Coefficients are taken against the standard Gaussian measure `gamma` in the
//! normalized basis `h_m`, so `sigma = sum_m c_m h_m` in `L^2(gamma)` and the
//! tail energy `R(d) = sum_{m>d} c_m^2` controls how well the degree-`d`
//! truncation approximates `sigma`.

mod activation;
pub(crate) mod basis;
pub mod quadrature;

pub use activation::{parse_coefficients, Activation, TabulatedActivation, TABULATED_TAIL_TOLERANCE};
pub use basis::{
    hermite_at_zero, hermite_eval, hermite_to_monomial, hermite_values, monomial_to_hermite,
    PolynomialCoefficients,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_ORDER: usize = 128;

/// Slack allowed by the Parseval and remainder invariants.
pub const PARSEVAL_TOLERANCE: f64 = 1e-10;

/// Hermite coefficients `c_0..c_D` of an activation plus its squared
/// `L^2(gamma)` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    pub coefficients: Vec<f64>,
    pub l2_norm_sq: f64,
    pub quad_order: usize,
}

fn check_order(m: usize, quad_order: usize) -> Result<()> {
    let required = 2 * m + 2;
    if quad_order < required {
        return Err(Error::QuadratureOrderTooLow { order: quad_order, degree: m, required });
    }
    Ok(())
}

/// Order actually used: polynomial activations get enough nodes for the
/// projection to be exact whatever their degree.
fn effective_order(activation: &Activation, max_degree: usize, quad_order: usize) -> usize {
    match activation.as_polynomial() {
        Some(p) => quad_order.max((p.degree() + max_degree) / 2 + 1).max(p.degree() + 1),
        None => quad_order,
    }
}

/// `c_m = int sigma h_m dgamma` by quadrature.
pub fn hermite_coefficient(activation: &Activation, m: usize, quad_order: usize) -> Result<f64> {
    check_order(m, quad_order)?;
    let order = effective_order(activation, m, quad_order);
    Ok(activation.integrate_against(order, |x| hermite_eval(m, x)))
}

impl HermiteExpansion {
    /// Coefficients up to `max_degree`, built from a single quadrature rule.
    pub fn compute(activation: &Activation, max_degree: usize, quad_order: usize) -> Result<Self> {
        check_order(max_degree, quad_order)?;
        let order = effective_order(activation, max_degree, quad_order);
        let integrator = activation.integrator(order);
        let coefficients = (0..=max_degree)
            .map(|m| integrator.against(|x| hermite_eval(m, x)))
            .collect();
        Ok(Self { coefficients, l2_norm_sq: integrator.norm_sq(), quad_order })
    }

    pub fn max_degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `sum_{m <= d} c_m^2`.
    pub fn partial_energy(&self, d: usize) -> f64 {
        self.coefficients.iter().take(d + 1).map(|c| c * c).sum()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `R(d) = ||sigma||^2 - sum_{m<=d} c_m^2`, clamped at zero.
    pub fn remainder(&self, d: usize) -> Result<f64> {
        if d > self.max_degree() {
            return Err(Error::DegreeOutOfRange { requested: d, available: self.max_degree() });
        }
        Ok((self.l2_norm_sq - self.partial_energy(d)).max(0.0))
    }

    /// Monomial coefficients of `p_d = sum_{m<=d} c_m h_m`.
    pub fn truncated_polynomial(&self, d: usize) -> Result<PolynomialCoefficients> {
        if d > self.max_degree() {
            return Err(Error::DegreeOutOfRange { requested: d, available: self.max_degree() });
        }
        Ok(hermite_to_monomial(&self.coefficients[..=d], d))
    }
}

/// Free-function form of [`HermiteExpansion::remainder`].
pub fn remainder(expansion: &HermiteExpansion, d: usize) -> Result<f64> {
    expansion.remainder(d)
}

/// Degree-`d` Hermite truncation of `activation` in the monomial basis.
pub fn truncated_polynomial(
    activation: &Activation,
    d: usize,
    quad_order: usize,
) -> Result<PolynomialCoefficients> {
    HermiteExpansion::compute(activation, d, quad_order)?.truncated_polynomial(d)
}

/// Where a ReLU coefficient value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientProvenance {
    ClosedForm,
    QuadratureFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCoefficient {
    pub value: f64,
    pub provenance: CoefficientProvenance,
}

/// The published closed form for `|c_m|` of ReLU, evaluated as printed:
/// `1/sqrt(2)` at `m = 1`, `0` for odd `m > 1`, `(m-3)!! / (sqrt(pi) sqrt(m!))`
/// otherwise with `(-1)!! = 1`.
///
/// The formula is undefined at `m = 0`; that case returns the quadrature value
/// flagged as a fallback. Note that for even `m >= 2` the printed values are
/// `sqrt(2)` times the quadrature values; callers wanting usable coefficients
/// should use [`hermite_coefficient`].
pub fn relu_coefficient_closed_form(m: usize) -> ClosedFormCoefficient {
    let closed = |value| ClosedFormCoefficient { value, provenance: CoefficientProvenance::ClosedForm };
    match m {
        0 => ClosedFormCoefficient {
            value: hermite_coefficient(&Activation::Relu, 0, DEFAULT_QUAD_ORDER)
                .expect("default order covers m = 0"),
            provenance: CoefficientProvenance::QuadratureFallback,
        },
        1 => closed(std::f64::consts::FRAC_1_SQRT_2),
        m if m % 2 == 1 => closed(0.0),
        m => {
            // ln (m-3)!! - 0.5 ln m!
            let mut log = 0.0;
            let mut j = m as i64 - 3;
            while j > 1 {
                log += (j as f64).ln();
                j -= 2;
            }
            log -= 0.5 * (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
            closed(log.exp() / std::f64::consts::PI.sqrt())
        }
    }
}

/// Upper bound `max|c| * (2 / sqrt(m!)) * 2^d` on the `m`-th monomial
/// coefficient of a degree-`d` Hermite truncation.
pub fn coefficient_bound_rhs(d: usize, m: usize, max_hermite_coef: f64) -> f64 {
    assert!(m <= d, "monomial index exceeds degree");
    let log_fact: f64 = (2..=m).map(|i| (i as f64).ln()).sum();
    max_hermite_coef * 2.0 * (-0.5 * log_fact + d as f64 * std::f64::consts::LN_2).exp()
}

/// Least-squares fit of `log|c_m|` against `-sqrt(m)` over odd `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Fitted decay rate `C` in `|c_m| ~ A e^{-C sqrt(m)}`.
    pub c: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Coefficients below this are treated as numerically zero.
const NONZERO_FLOOR: f64 = 1e-14;

pub fn tanh_decay_fit(max_m: usize, quad_order: usize) -> Result<DecayFit> {
    if max_m < 10 {
        return Err(Error::InvalidParameter(format!("decay fit needs max_m >= 10, got {max_m}")));
    }
    let expansion = HermiteExpansion::compute(&Activation::Tanh, max_m, quad_order)?;
    let pts: Vec<(f64, f64)> = expansion
        .coefficients
        .iter()
        .enumerate()
        .filter(|(m, c)| m % 2 == 1 && c.abs() > NONZERO_FLOOR)
        .map(|(m, c)| (-(m as f64).sqrt(), c.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::TooFewCoefficients { required: 4, found: pts.len() });
    }
    let (slope, intercept, r_squared, rms) = ols(&pts);
    Ok(DecayFit { c: slope, intercept, residual: rms, r_squared, points: pts.len() })
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, r^2, rms residual)`.
pub(crate) fn ols(pts: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, r2, (sse / n).sqrt())
}
