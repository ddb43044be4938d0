use std::sync::Arc;

use nalgebra::DVector;

use super::multi_index::FeatureBasis;
use crate::error::{Error, Result};
use crate::hermite::PolynomialCoefficients;

/// Coordinates of an element of `H` in a [`FeatureBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub basis: Arc<FeatureBasis>,
    pub coords: DVector<f64>,
}

impl FeatureVector {
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// The embedding `P(x) = sum_m sqrt(|a_m|) x^{(x) m}` for a fixed polynomial.
///
/// The level-`m` coordinate of index `I` is `sqrt(|a_m| * m!/I!) * x^I`; the
/// multinomial weight makes `<x^{(x)m}, y^{(x)m}> = (x . y)^m` hold exactly in
/// the flattened symmetric representation.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    basis: Arc<FeatureBasis>,
    poly: PolynomialCoefficients,
    scale: Vec<f64>,
}

impl FeatureMap {
    pub fn new(poly: &PolynomialCoefficients, n: usize) -> Result<Self> {
        Self::with_basis(poly, FeatureBasis::new(n, poly.degree())?)
    }

    pub fn with_basis(poly: &PolynomialCoefficients, basis: Arc<FeatureBasis>) -> Result<Self> {
        if basis.d != poly.degree() {
            return Err(Error::Shape(format!(
                "basis degree {} does not match polynomial degree {}",
                basis.d,
                poly.degree()
            )));
        }
        let scale = basis
            .index_list
            .iter()
            .map(|idx| {
                let m = idx.degree() as usize;
                (poly.a[m].abs() * idx.multinomial()).sqrt()
            })
            .collect();
        Ok(Self { basis, poly: poly.clone(), scale })
    }

    pub fn basis(&self) -> &Arc<FeatureBasis> {
        &self.basis
    }

    pub fn poly(&self) -> &PolynomialCoefficients {
        &self.poly
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Per-coordinate weight `sqrt(|a_m| m!/I!)`.
    pub fn scales(&self) -> &[f64] {
        &self.scale
    }

    /// Writes `P(x)` into `out` (length `dim`).
    pub fn embed_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.basis.n, "point dimension mismatch");
        assert_eq!(out.len(), self.dim());
        let d = self.basis.d;
        // powers[i][k] = x_i^k
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut p = Vec::with_capacity(d + 1);
                let mut acc = 1.0;
                for _ in 0..=d {
                    p.push(acc);
                    acc *= xi;
                }
                p
            })
            .collect();
        for ((o, idx), &s) in out.iter_mut().zip(&self.basis.index_list).zip(&self.scale) {
            if s == 0.0 {
                *o = 0.0;
                continue;
            }
            let mut v = s;
            for (i, &k) in idx.0.iter().enumerate() {
                if k > 0 {
                    v *= powers[i][k as usize];
                }
            }
            *o = v;
        }
    }

    pub fn embed(&self, x: &[f64]) -> FeatureVector {
        let mut coords = DVector::zeros(self.dim());
        self.embed_into(x, coords.as_mut_slice());
        FeatureVector { basis: Arc::clone(&self.basis), coords }
    }

    /// `Q(u, v) = sum_m sign(a_m) <pi_m u, pi_m v>`.
    pub fn q_form(&self, u: &FeatureVector, v: &FeatureVector) -> Result<f64> {
        for w in [u, v] {
            if !w.basis.same_shape(&self.basis) {
                return Err(Error::BasisMismatch {
                    n1: w.basis.n,
                    d1: w.basis.d,
                    n2: self.basis.n,
                    d2: self.basis.d,
                });
            }
        }
        Ok(self.q_form_slices(u.coords.as_slice(), v.coords.as_slice()))
    }

    pub(crate) fn q_form_slices(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut total = 0.0;
        for m in 0..=self.basis.d {
            let sign = sign(self.poly.a[m]);
            if sign == 0.0 {
                continue;
            }
            let r = self.basis.level_range(m);
            let dot: f64 = u[r.clone()].iter().zip(&v[r]).map(|(a, b)| a * b).sum();
            total += sign * dot;
        }
        total
    }
}

fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `P(x)` for a single point.
pub fn embed_point(x: &[f64], poly: &PolynomialCoefficients) -> Result<FeatureVector> {
    Ok(FeatureMap::new(poly, x.len())?.embed(x))
}

/// `Q(u, v)` for the sign pattern of `poly`.
pub fn q_form(u: &FeatureVector, v: &FeatureVector, poly: &PolynomialCoefficients) -> Result<f64> {
    if !u.basis.same_shape(&v.basis) {
        return Err(Error::BasisMismatch { n1: u.basis.n, d1: u.basis.d, n2: v.basis.n, d2: v.basis.d });
    }
    FeatureMap::with_basis(poly, Arc::clone(&u.basis))?.q_form(u, v)
}
