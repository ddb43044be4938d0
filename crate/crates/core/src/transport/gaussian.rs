use nalgebra::{DMatrix, DVector};

use super::estimate::{Estimator, Normalization, TransportEstimate};
use crate::error::{Error, Result};
use crate::tensor::symmetric_spectrum;

/// Relative eigenvalue tolerance below which a covariance counts as PSD.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `C^{1/2}` of a symmetric PSD matrix; tiny negative eigenvalues are clamped.
pub fn psd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = symmetric_spectrum(c)?;
    let scale = s.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if s.min() < -PSD_TOLERANCE * scale.max(1.0) {
        return Err(Error::NotPsd(s.min()));
    }
    let roots = DVector::from_iterator(s.values.len(), s.values.iter().map(|v| v.max(0.0).sqrt()));
    Ok(&s.vectors * DMatrix::from_diagonal(&roots) * s.vectors.transpose())
}

/// Bures formula `|mu1 - mu2|^2 + tr(C1 + C2 - 2 (C2^{1/2} C1 C2^{1/2})^{1/2})`.
pub fn w2_gaussian(
    mean1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mean2: &DVector<f64>,
    cov2: &DMatrix<f64>,
) -> Result<TransportEstimate> {
    let m = mean1.len();
    if mean2.len() != m || cov1.shape() != (m, m) || cov2.shape() != (m, m) {
        return Err(Error::Shape("mean and covariance dimensions disagree".into()));
    }
    psd_sqrt(cov1)?;
    let r2 = psd_sqrt(cov2)?;
    let mut inner = &r2 * cov1 * &r2;
    inner = (&inner + inner.transpose()) * 0.5;
    let cross = psd_sqrt(&inner)?;
    let value = (mean1 - mean2).norm_squared() + cov1.trace() + cov2.trace() - 2.0 * cross.trace();
    Ok(TransportEstimate::point(value, Estimator::GaussianClosedForm, Normalization::Raw, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(v.to_vec()))
    }

    #[test]
    fn examples() {
        let z = DVector::zeros(2);
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(w2_gaussian(&z, &c, &z, &c).unwrap().value.abs() < 1e-12);
        let z1 = DVector::zeros(1);
        let v = w2_gaussian(&z1, &diag(&[1.0]), &z1, &diag(&[4.0])).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
        let v = w2_gaussian(&z, &diag(&[1.0, 4.0]), &z, &diag(&[4.0, 1.0])).unwrap().value;
        assert!((v - 2.0).abs() < 1e-12);
        let shift = DVector::from_vec(vec![1.0, 2.0]);
        let v = w2_gaussian(&z, &c, &shift, &c).unwrap().value;
        assert!((v - 5.0).abs() < 1e-10);
    }

    #[test]
    fn symmetric_in_arguments_and_rejects_indefinite() {
        let z = DVector::zeros(2);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, -0.3, -0.3, 3.0]);
        let ab = w2_gaussian(&z, &a, &z, &b).unwrap().value;
        let ba = w2_gaussian(&z, &b, &z, &a).unwrap().value;
        assert!((ab - ba).abs() < 1e-9);
        assert!(matches!(w2_gaussian(&z, &diag(&[1.0, -1.0]), &z, &a), Err(Error::NotPsd(_))));
    }
}
