use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use super::network::{ProcessMarginalSample, SampleMetadata};
use super::points::PointSet;
use super::rng::{normal_vector, stream_rng, streams};
use crate::error::{Error, Result};
use crate::hermite::{Activation, HermiteExpansion, DEFAULT_QUAD_ORDER};

/// Truncation degree of the limiting kernel for non-polynomial activations.
pub const DEFAULT_KERNEL_DEGREE: usize = 40;
/// Largest number of x10 jitter escalations in [`sample_gp_marginal`].
pub const MAX_JITTER_STEPS: usize = 6;

/// Covariance of the limiting process at a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub matrix: DMatrix<f64>,
    /// Jitter added on the diagonal by the last factorization (0 until sampled).
    pub jitter: f64,
    /// Truncation degree `D` of the Hermite series.
    pub degree: usize,
    /// Tail energy `R(D)` dropped by the truncation.
    pub remainder: f64,
}

/// Hermite expansion used for the kernel: exact for polynomials, degree
/// [`DEFAULT_KERNEL_DEGREE`] otherwise.
pub fn kernel_expansion(activation: &Activation) -> Result<HermiteExpansion> {
    let degree = match activation.as_polynomial() {
        Some(p) => p.degree(),
        None => DEFAULT_KERNEL_DEGREE,
    };
    HermiteExpansion::compute(activation, degree, DEFAULT_QUAD_ORDER)
}

/// `K_{jl} = sum_{m <= D} c_m^2 (x_j . x_l)^m`.
pub fn nngp_kernel(expansion: &HermiteExpansion, points: &PointSet) -> Result<KernelMatrix> {
    let m = points.len();
    let c2: Vec<f64> = expansion.coefficients.iter().map(|c| c * c).collect();
    let mut matrix = DMatrix::zeros(m, m);
    for j in 0..m {
        for l in j..m {
            let rho = if j == l { 1.0 } else { points.dot(j, l) };
            // Horner in rho
            let v = c2.iter().rev().fold(0.0, |acc, c| acc * rho + c);
            matrix[(j, l)] = v;
            matrix[(l, j)] = v;
        }
    }
    let degree = expansion.max_degree();
    Ok(KernelMatrix { matrix, jitter: 0.0, degree, remainder: expansion.remainder(degree)? })
}

/// Lower Cholesky factor of `K + jitter I`, escalating the jitter from
/// `max(jitter, 1e-12 tr(K)/m)` by x10 up to [`MAX_JITTER_STEPS`] times when
/// the factorization fails. Returns the factor and the jitter used.
pub fn factor_with_jitter(k: &DMatrix<f64>, jitter: f64) -> Result<(DMatrix<f64>, f64)> {
    let m = k.nrows();
    if let Some(c) = Cholesky::new((k + DMatrix::identity(m, m) * jitter).clone()) {
        return Ok((c.l(), jitter));
    }
    let mut j = jitter.max(1e-12 * k.trace() / m as f64);
    if j <= 0.0 {
        return Err(Error::JitterExhausted { jitter: j });
    }
    for _ in 0..MAX_JITTER_STEPS {
        if let Some(c) = Cholesky::new(k + DMatrix::identity(m, m) * j) {
            return Ok((c.l(), j));
        }
        j *= 10.0;
    }
    Err(Error::JitterExhausted { jitter: j / 10.0 })
}

/// `reps` draws from `N(0, K + jitter I)`, draw `r` seeded by `(seed, r)`.
pub fn sample_gp_marginal(
    kernel: &KernelMatrix,
    points: &PointSet,
    reps: usize,
    seed: u64,
    jitter: f64,
) -> Result<ProcessMarginalSample> {
    let m = kernel.matrix.nrows();
    if m != points.len() {
        return Err(Error::Shape(format!("kernel is {m}x{m} but there are {} points", points.len())));
    }
    if reps == 0 || !(jitter >= 0.0) {
        return Err(Error::InvalidParameter("reps must be positive and jitter nonnegative".into()));
    }
    let asym = (&kernel.matrix - kernel.matrix.transpose()).amax();
    if asym > 1e-12 * kernel.matrix.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let metadata = |j| SampleMetadata {
        source: "gp".into(),
        k: None,
        activation: String::new(),
        seed,
        jitter: Some(j),
    };
    if kernel.matrix.iter().all(|v| *v == 0.0) && jitter == 0.0 {
        return Ok(ProcessMarginalSample { values: DMatrix::zeros(reps, m), points: points.clone(), metadata: metadata(0.0) });
    }
    let (l, used) = factor_with_jitter(&kernel.matrix, jitter)?;
    let rows: Vec<DVector<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = DVector::from_vec(normal_vector(&mut stream_rng(seed, streams::GP, r as u64), m));
            &l * z
        })
        .collect();
    let values = DMatrix::from_fn(reps, m, |r, j| rows[r][j]);
    Ok(ProcessMarginalSample { values, points: points.clone(), metadata: metadata(used) })
}

/// Unbiased column covariance of a `reps x m` table.
pub fn column_covariance(values: &DMatrix<f64>) -> DMatrix<f64> {
    let reps = values.nrows() as f64;
    let mean = values.row_mean();
    let mut centered = values.clone();
    for mut r in centered.row_iter_mut() {
        r -= &mean;
    }
    centered.tr_mul(&centered) / (reps - 1.0)
}

/// Standard errors of the entries of [`column_covariance`], from the sample
/// variance of the centered products.
pub fn column_covariance_stderr(values: &DMatrix<f64>) -> DMatrix<f64> {
    let reps = values.nrows();
    let mean = values.row_mean();
    let m = values.ncols();
    DMatrix::from_fn(m, m, |a, b| {
        let prods: Vec<f64> =
            (0..reps).map(|r| (values[(r, a)] - mean[a]) * (values[(r, b)] - mean[b])).collect();
        let mu = prods.iter().sum::<f64>() / reps as f64;
        let var = prods.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        (var / reps as f64).sqrt()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_marginal, sphere_sample};

    fn within(emp: &DMatrix<f64>, se: &DMatrix<f64>, want: &DMatrix<f64>, z: f64) -> bool {
        emp.iter().zip(se.iter()).zip(want.iter()).all(|((e, s), w)| (e - w).abs() <= z * s + 1e-12)
    }

    #[test]
    fn diagonal_and_orthogonal_entries() {
        let pts = PointSet::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let tanh = nngp_kernel(&kernel_expansion(&Activation::Tanh).unwrap(), &pts).unwrap();
        assert!(tanh.matrix[(0, 1)].abs() < 1e-15);
        let e = kernel_expansion(&Activation::Tanh).unwrap();
        assert!((tanh.matrix[(0, 0)] - (e.l2_norm_sq - tanh.remainder)).abs() < 1e-12);
        assert!(tanh.remainder < 1e-6);

        let relu = nngp_kernel(&kernel_expansion(&Activation::Relu).unwrap(), &pts).unwrap();
        assert!((relu.matrix[(0, 1)] - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
        assert!((relu.matrix[(0, 0)] + relu.remainder - 0.5).abs() < 1e-10);
    }

    #[test]
    fn identity_kernel_sampling() {
        let pts = PointSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let k = KernelMatrix { matrix: DMatrix::identity(2, 2), jitter: 0.0, degree: 0, remainder: 0.0 };
        let s = sample_gp_marginal(&k, &pts, 10_000, 3, 0.0).unwrap();
        let emp = column_covariance(&s.values);
        assert!(within(&emp, &column_covariance_stderr(&s.values), &k.matrix, 5.0));
        let zero = KernelMatrix { matrix: DMatrix::zeros(2, 2), ..k };
        let s = sample_gp_marginal(&zero, &pts, 10, 3, 0.0).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quadratic_kernel_round_trip_and_network_match() {
        let act = Activation::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        let pts = sphere_sample(3, 3, 4).unwrap();
        let k = nngp_kernel(&kernel_expansion(&act).unwrap(), &pts).unwrap();
        assert_eq!(k.remainder, 0.0);
        let s = sample_gp_marginal(&k, &pts, 10_000, 9, 0.0).unwrap();
        assert!(within(&column_covariance(&s.values), &column_covariance_stderr(&s.values), &k.matrix, 5.0));
        let net = sample_marginal(16, &act, &pts, 10_000, 9).unwrap();
        assert!(within(&column_covariance(&net.values), &column_covariance_stderr(&net.values), &k.matrix, 5.0));
    }

    #[test]
    fn jitter_escalates_on_singular_kernel() {
        let k = DMatrix::from_element(3, 3, 1.0);
        let (l, used) = factor_with_jitter(&k, 0.0).unwrap();
        assert!(used > 0.0);
        assert!((&l * l.transpose() - &k).amax() <= 10.0 * used);
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(factor_with_jitter(&bad, 0.0), Err(Error::JitterExhausted { .. })));
    }
}
