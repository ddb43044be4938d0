use serde::Serialize;

use super::config::MAX_TABLE_DEGREE;
use crate::error::{Error, Result};
use crate::hermite::{relu_coefficient_closed_form, Activation, CoefficientProvenance, HermiteExpansion};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub m: usize,
    pub quadrature: f64,
    /// ReLU only.
    pub closed_form: Option<f64>,
    pub provenance: Option<CoefficientProvenance>,
    /// `closed_form / |quadrature|` where both are nonzero; the closed form
    /// gives magnitudes only.
    pub ratio: Option<f64>,
    /// `R(m)`; values within rounding of zero are reported as zero.
    pub remainder: f64,
}

pub fn run_coefficient_table(activation: &Activation, dmax: usize, quad_order: usize) -> Result<Vec<CoefficientRow>> {
    if dmax > MAX_TABLE_DEGREE {
        return Err(Error::DegreeOutOfRange { requested: dmax, available: MAX_TABLE_DEGREE });
    }
    let expansion = HermiteExpansion::compute(activation, dmax, quad_order)?;
    let floor = 64.0 * f64::EPSILON * expansion.l2_norm_sq;
    (0..=dmax)
        .map(|m| {
            let quadrature = expansion.coefficients[m];
            let closed = matches!(activation, Activation::Relu).then(|| relu_coefficient_closed_form(m));
            let ratio = closed
                .filter(|c| c.value != 0.0 && quadrature.abs() > floor.sqrt())
                .map(|c| c.value / quadrature.abs());
            let remainder = expansion.remainder(m)?;
            Ok(CoefficientRow {
                m,
                quadrature,
                closed_form: closed.map(|c| c.value),
                provenance: closed.map(|c| c.provenance),
                ratio,
                remainder: if remainder <= floor { 0.0 } else { remainder },
            })
        })
        .collect()
}
