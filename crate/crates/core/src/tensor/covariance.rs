use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::feature::FeatureMap;
use super::moments::{gaussian_moment, moment_of_sum};
use super::multi_index::FeatureBasis;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::hermite::basis::ln_factorial;
use crate::hermite::PolynomialCoefficients;
use crate::process::rng::{normal_vector, stream_rng, streams};

/// Samples per block in [`covariance_empirical`]; each block has its own seed.
pub const COVARIANCE_BLOCK: usize = 4096;

/// Relative asymmetry tolerated by [`spectrum`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Analytic,
    Empirical { samples: usize, seed: u64 },
}

/// `Sigma = Cov(P(w))` in the coordinates of a [`FeatureBasis`].
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    pub basis: Arc<FeatureBasis>,
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

impl CovarianceOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_dense(dim: usize) -> Result<()> {
    let cap = Caps::from_env().dense;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

/// Exact `Sigma_{IJ} = s_I s_J (E[w^{I+J}] - E[w^I] E[w^J])` with `s_I` the
/// coordinate scales of the feature map.
pub fn covariance_analytic(poly: &PolynomialCoefficients, n: usize) -> Result<CovarianceOperator> {
    let map = FeatureMap::new(poly, n)?;
    let dim = map.dim();
    check_dense(dim)?;
    let basis = Arc::clone(map.basis());
    let scale = map.scales();
    let means: Vec<f64> = basis.index_list.iter().map(gaussian_moment).collect();
    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let ii = &basis.index_list[i];
            (0..dim)
                .map(|j| {
                    let s = scale[i] * scale[j];
                    if s == 0.0 {
                        return 0.0;
                    }
                    s * (moment_of_sum(ii, &basis.index_list[j]) - means[i] * means[j])
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    Ok(CovarianceOperator { basis, matrix, provenance: Provenance::Analytic })
}

/// Running `(count, mean, M2)` for the parallel covariance update.
struct Moments {
    count: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta = &other.mean - &self.mean;
        let mean = &self.mean + &delta * (nb / total);
        let m2 = self.m2 + other.m2 + (&delta * delta.transpose()) * (na * nb / total);
        Moments { count: self.count + other.count, mean, m2 }
    }
}

/// Unbiased sample covariance of `P(w)` over `samples` standard Gaussian `w`.
///
/// Samples are drawn in fixed-size blocks seeded by block index; block
/// statistics are merged in block order, so the result depends only on
/// `(poly, n, samples, seed)`.
pub fn covariance_empirical(
    poly: &PolynomialCoefficients,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<CovarianceOperator> {
    if samples < 2 {
        return Err(Error::InvalidParameter("empirical covariance needs at least 2 samples".into()));
    }
    let map = FeatureMap::new(poly, n)?;
    let dim = map.dim();
    check_dense(dim)?;
    let blocks = samples.div_ceil(COVARIANCE_BLOCK);
    let group = rayon::current_num_threads().max(1) * 2;
    let mut total: Option<Moments> = None;
    for start in (0..blocks).step_by(group) {
        let end = (start + group).min(blocks);
        let stats: Vec<Moments> = (start..end)
            .into_par_iter()
            .map(|b| {
                let count = COVARIANCE_BLOCK.min(samples - b * COVARIANCE_BLOCK);
                let mut rng = stream_rng(seed, streams::COVARIANCE, b as u64);
                let mut data = DMatrix::zeros(count, dim);
                let mut row = vec![0.0; dim];
                for r in 0..count {
                    let w = normal_vector(&mut rng, n);
                    map.embed_into(&w, &mut row);
                    for (c, v) in row.iter().enumerate() {
                        data[(r, c)] = *v;
                    }
                }
                let mean = DVector::from_iterator(dim, data.column_iter().map(|c| c.mean()));
                for mut r in data.row_iter_mut() {
                    r -= mean.transpose();
                }
                let m2 = data.tr_mul(&data);
                Moments { count, mean, m2 }
            })
            .collect();
        for s in stats {
            total = Some(match total {
                None => s,
                Some(t) => t.merge(s),
            });
        }
    }
    let total = total.expect("at least one block");
    let mut matrix = total.m2 / (samples as f64 - 1.0);
    // the rank-one merge terms are symmetric only up to rounding
    matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(CovarianceOperator {
        basis: Arc::clone(map.basis()),
        matrix,
        provenance: Provenance::Empirical { samples, seed },
    })
}

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_vec(self.values.clone()));
        &self.vectors * d * self.vectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Symmetric eigendecomposition of any square symmetric matrix.
pub fn symmetric_spectrum(matrix: &DMatrix<f64>) -> Result<Spectrum> {
    if !matrix.is_square() {
        return Err(Error::Shape(format!("{}x{} matrix is not square", matrix.nrows(), matrix.ncols())));
    }
    let scale = matrix.amax().max(1.0);
    let asym = (matrix - matrix.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(matrix.clone());
    let dim = matrix.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(dim, dim);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(c, &v);
    }
    Ok(Spectrum { values, vectors })
}

pub fn spectrum(cov: &CovarianceOperator) -> Result<Spectrum> {
    symmetric_spectrum(&cov.matrix)
}

/// Partition of the eigenpairs of `Sigma` at threshold `delta`.
///
/// `kept` spans `V_delta^perp` (eigenvalues above `delta`), `discarded` spans
/// `V_delta`. With `delta = 0` nothing is discarded.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub delta: f64,
    pub kept_values: Vec<f64>,
    pub kept_vectors: DMatrix<f64>,
    pub discarded_values: Vec<f64>,
    pub discarded_vectors: DMatrix<f64>,
    /// `8 n^d delta`.
    pub penalty: f64,
}

impl SpectralSplit {
    /// Orthogonal projector onto the kept eigenvectors.
    pub fn kept_projector(&self) -> DMatrix<f64> {
        &self.kept_vectors * self.kept_vectors.transpose()
    }

    /// Orthogonal projector onto the discarded eigenvectors.
    pub fn discarded_projector(&self) -> DMatrix<f64> {
        &self.discarded_vectors * self.discarded_vectors.transpose()
    }
}

pub fn split_spectrum(spec: &Spectrum, n: usize, d: usize, delta: f64) -> Result<SpectralSplit> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be nonnegative, got {delta}")));
    }
    let dim = spec.values.len();
    let kept = if delta == 0.0 { dim } else { spec.values.iter().filter(|&&l| l > delta).count() };
    let penalty = 8.0 * (n as f64).powi(d as i32) * delta;
    Ok(SpectralSplit {
        delta,
        kept_values: spec.values[..kept].to_vec(),
        kept_vectors: spec.vectors.columns(0, kept).clone_owned(),
        discarded_values: spec.values[kept..].to_vec(),
        discarded_vectors: spec.vectors.columns(kept, dim - kept).clone_owned(),
        penalty,
    })
}

pub fn truncate_spectrum(cov: &CovarianceOperator, delta: f64) -> Result<SpectralSplit> {
    split_spectrum(&spectrum(cov)?, cov.basis.n, cov.basis.d, delta)
}

/// `ln((4d)! max|a| n^{(d-1)/2})`; `-inf` when `max_abs_coef = 0`.
pub fn sigma_upper_bound_log_rhs(d: usize, n: usize, max_abs_coef: f64) -> f64 {
    ln_factorial(4 * d) + max_abs_coef.ln() + 0.5 * (d as f64 - 1.0) * (n as f64).ln()
}

/// Upper bound `(4d)! max|a_m| n^{(d-1)/2}` on `||Sigma||_op`.
pub fn sigma_upper_bound_rhs(d: usize, n: usize, max_abs_coef: f64) -> f64 {
    if max_abs_coef == 0.0 {
        return 0.0;
    }
    sigma_upper_bound_log_rhs(d, n, max_abs_coef).exp()
}

/// `ln delta` for `delta = ((110d)! n^{2d - 1/2} max|a|^3 / k)^{1/3}`.
pub fn paper_delta_log(n: usize, k: usize, d: usize, max_abs_coef: f64) -> f64 {
    (ln_factorial(110 * d) + (2.0 * d as f64 - 0.5) * (n as f64).ln() + 3.0 * max_abs_coef.ln()
        - (k as f64).ln())
        / 3.0
}

/// Eigenvalue threshold used in the polynomial CLT argument; `+inf` when it
/// overflows `f64` (it does for every `d >= 2`).
pub fn paper_delta(n: usize, k: usize, d: usize, max_abs_coef: f64) -> f64 {
    paper_delta_log(n, k, d, max_abs_coef).exp()
}

/// `||Sigma||_op` for `p(x) = x^2` in dimension `n`.
pub fn quadratic_opnorm_audit(n: usize) -> Result<f64> {
    let cov = covariance_analytic(&PolynomialCoefficients::new(vec![0.0, 0.0, 1.0]), n)?;
    Ok(spectrum(&cov)?.max())
}
