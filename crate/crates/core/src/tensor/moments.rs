//! Exact Gaussian moments of multivariate polynomials.
//!
//! Two independent routes to `Var(q(w))` for standard Gaussian `w`: direct
//! expansion of `E[q^2] - E[q]^2` into coordinate moments, and the chaos-type
//! expansion `sum_m ||E[grad^m q(w)]||^2 / m!` computed from exact expected
//! derivatives.

use std::collections::{BTreeMap, HashMap};

use super::multi_index::{factorial, gaussian_even_moment, level_size, MultiIndex};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::hermite::quadrature::Neumaier;

/// Sparse polynomial `q(x) = sum_I v_I x^I`.
pub type MultiPoly = BTreeMap<MultiIndex, f64>;

/// `E[w^I] = prod_i (I_i - 1)!!` when every exponent is even, else `0`.
pub fn gaussian_moment(index: &MultiIndex) -> f64 {
    if !index.all_even() {
        return 0.0;
    }
    index.0.iter().map(|&k| gaussian_even_moment(k)).product()
}

pub(crate) fn moment_of_sum(a: &MultiIndex, b: &MultiIndex) -> f64 {
    let mut v = 1.0;
    for (&x, &y) in a.0.iter().zip(&b.0) {
        let k = x + y;
        if k % 2 == 1 {
            return 0.0;
        }
        v *= gaussian_even_moment(k);
    }
    v
}

fn parity_key(index: &MultiIndex) -> Vec<u8> {
    index.0.iter().map(|k| (k % 2) as u8).collect()
}

/// `E[q(w)]`.
pub fn polynomial_mean(coeffs: &MultiPoly) -> f64 {
    let mut acc = Neumaier::default();
    for (idx, v) in coeffs {
        acc.add(v * gaussian_moment(idx));
    }
    acc.sum()
}

/// `Var(q(w)) = sum_{I,J} v_I v_J (E[w^{I+J}] - E[w^I] E[w^J])`.
///
/// Pairs whose exponent parities differ have `E[w^{I+J}] = 0` and at least
/// one of `E[w^I]`, `E[w^J]` zero, so the double sum runs within parity
/// classes only.
pub fn polynomial_variance_moments(coeffs: &MultiPoly) -> f64 {
    let mut classes: HashMap<Vec<u8>, Vec<(&MultiIndex, f64)>> = HashMap::new();
    for (idx, &v) in coeffs {
        if v != 0.0 {
            classes.entry(parity_key(idx)).or_default().push((idx, v));
        }
    }
    let mut keys: Vec<&Vec<u8>> = classes.keys().collect();
    keys.sort();
    let mut acc = Neumaier::default();
    for key in keys {
        let members = &classes[key];
        for (a, &(ia, va)) in members.iter().enumerate() {
            let ma = gaussian_moment(ia);
            acc.add(va * va * (moment_of_sum(ia, ia) - ma * ma));
            for &(ib, vb) in &members[a + 1..] {
                let cov = moment_of_sum(ia, ib) - ma * gaussian_moment(ib);
                acc.add(2.0 * va * vb * cov);
            }
        }
    }
    acc.sum()
}

/// Per-order terms of the derivative expansion: entry `m` (for `m >= 1`) is
/// `||E[grad^m q(w)]||_m^2 / m!`, with the norm taken in the full tensor space
/// `(R^n)^{(x) m}`. Entry `0` is always zero.
pub fn variance_expansion_terms(coeffs: &MultiPoly) -> Vec<f64> {
    // E[d^J q(w)] for every J that can be nonzero
    let mut expected: BTreeMap<MultiIndex, Neumaier> = BTreeMap::new();
    let mut max_degree = 0;
    for (idx, &v) in coeffs {
        if v == 0.0 {
            continue;
        }
        max_degree = max_degree.max(idx.degree() as usize);
        // J <= I with I - J all even
        let halves: Vec<u32> = idx.0.iter().map(|k| k / 2).collect();
        let mut steps = vec![0u32; idx.dim()];
        loop {
            let j = MultiIndex(idx.0.iter().zip(&steps).map(|(k, s)| k - 2 * s).collect());
            if j.degree() > 0 {
                // d^J x^I = prod_i I_i!/(I_i - J_i)! x^{I-J}
                let mut coef = v;
                for (&ik, &s) in idx.0.iter().zip(&steps) {
                    let rest = 2 * s;
                    coef *= factorial(ik) / factorial(rest) * gaussian_even_moment(rest);
                }
                expected.entry(j).or_default().add(coef);
            }
            // odometer over steps[i] in 0..=halves[i]
            let mut pos = 0;
            loop {
                if pos == steps.len() {
                    break;
                }
                if steps[pos] < halves[pos] {
                    steps[pos] += 1;
                    break;
                }
                steps[pos] = 0;
                pos += 1;
            }
            if pos == steps.len() {
                break;
            }
        }
    }
    let mut terms = vec![Neumaier::default(); max_degree + 1];
    for (j, e) in &expected {
        let m = j.degree() as usize;
        let e = e.sum();
        // the symmetric entry for J appears multinomial(J) times in the full tensor
        let tensor_norm_sq = j.multinomial() * e * e;
        terms[m].add(tensor_norm_sq / factorial(m as u32));
    }
    terms.iter().map(Neumaier::sum).collect()
}

/// `Var(q(w))` via the derivative expansion.
pub fn polynomial_variance_derivative_expansion(coeffs: &MultiPoly) -> f64 {
    let mut acc = Neumaier::default();
    for t in variance_expansion_terms(coeffs) {
        acc.add(t);
    }
    acc.sum()
}

/// Product of two sparse polynomials in the same number of variables.
pub fn poly_mul(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    let mut out = MultiPoly::new();
    for (ia, va) in a {
        for (ib, vb) in b {
            *out.entry(ia.add(ib)).or_insert(0.0) += va * vb;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// `q(x) = n^{-l/2} sum_{i_1..i_l} x_{i_1} x_{i_2}^2 ... x_{i_l}^2`, i.e.
/// `n^{-l/2} (sum_i x_i) (|x|^2)^{l-1}`, a degree `2l - 1` polynomial.
pub fn sharpness_polynomial(n: usize, ell: usize) -> Result<MultiPoly> {
    if n < 1 || ell < 1 {
        return Err(Error::InvalidParameter("sharpness polynomial needs n >= 1 and l >= 1".into()));
    }
    let cap = Caps::from_env().enumeration;
    let terms = level_size(n, 2 * ell - 1);
    if terms > cap {
        return Err(Error::DimensionCap { dim: terms, cap });
    }
    let linear: MultiPoly = (0..n).map(|i| (MultiIndex::unit(n, i, 1), 1.0)).collect();
    let square_norm: MultiPoly = (0..n).map(|i| (MultiIndex::unit(n, i, 2), 1.0)).collect();
    let mut q = linear;
    for _ in 1..ell {
        q = poly_mul(&q, &square_norm);
    }
    let scale = (n as f64).powf(-(ell as f64) / 2.0);
    q.values_mut().for_each(|v| *v *= scale);
    Ok(q)
}

/// `sum_I v_I^2`.
pub fn coefficient_norm_sq(coeffs: &MultiPoly) -> f64 {
    coeffs.values().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::rng::{normal_vector, stream_rng};
    use rand::Rng;

    fn mono(exps: &[u32], v: f64) -> MultiPoly {
        [(MultiIndex(exps.to_vec()), v)].into_iter().collect()
    }

    /// Monte Carlo mean of `prod_i w_i^{I_i}` with its standard error.
    fn mc_moment(index: &[u32], samples: usize) -> (f64, f64) {
        let mut rng = stream_rng(17, 99, 0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let w = normal_vector(&mut rng, index.len());
            let v: f64 = w.iter().zip(index).map(|(x, &k)| x.powi(k as i32)).product();
            s += v;
            s2 += v * v;
        }
        let mean = s / samples as f64;
        let var = s2 / samples as f64 - mean * mean;
        (mean, (var / samples as f64).sqrt())
    }

    #[test]
    fn moment_examples() {
        assert_eq!(gaussian_moment(&MultiIndex(vec![2, 2])), 1.0);
        assert_eq!(gaussian_moment(&MultiIndex(vec![4, 0, 2])), 3.0);
        assert_eq!(gaussian_moment(&MultiIndex(vec![1, 2])), 0.0);
    }

    #[test]
    fn moment_matches_monte_carlo() {
        let (mean, se) = mc_moment(&[4, 0, 2], 2_000_000);
        assert!((mean - 3.0).abs() <= 3.0 * se, "{mean} +- {se}");
    }

    #[test]
    fn variance_examples() {
        for (exps, want) in [(vec![1, 0], 1.0), (vec![1, 1], 1.0), (vec![2, 0], 2.0)] {
            let q = mono(&exps, 1.0);
            assert!((polynomial_variance_moments(&q) - want).abs() < 1e-14);
            assert!((polynomial_variance_derivative_expansion(&q) - want).abs() < 1e-14);
        }
        let terms = variance_expansion_terms(&mono(&[1, 0], 1.0));
        assert_eq!(terms, vec![0.0, 1.0]);
        let terms = variance_expansion_terms(&mono(&[2, 0], 1.0));
        assert!(terms[1].abs() < 1e-15 && (terms[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn methods_agree_on_random_polynomials() {
        let mut rng = stream_rng(5, 0, 0);
        for _ in 0..40 {
            let n = rng.random_range(1..=4usize);
            let d = rng.random_range(1..=4u32);
            let mut q = MultiPoly::new();
            for _ in 0..6 {
                let mut e = vec![0u32; n];
                for _ in 0..rng.random_range(0..=d) {
                    e[rng.random_range(0..n)] += 1;
                }
                *q.entry(MultiIndex(e)).or_insert(0.0) += rng.random_range(-1.0..1.0);
            }
            let a = polynomial_variance_moments(&q);
            let b = polynomial_variance_derivative_expansion(&q);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b} for {q:?}");
        }
    }

    #[test]
    fn homogeneous_unit_vectors_have_variance_at_least_inverse_factorial() {
        let mut rng = stream_rng(6, 0, 0);
        for d in 1..=4usize {
            let idx = crate::tensor::multi_indices(3, d).unwrap();
            for _ in 0..50 {
                let v = normal_vector(&mut rng, idx.len());
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let q: MultiPoly = idx.iter().cloned().zip(v.iter().map(|x| x / norm)).collect();
                let var = polynomial_variance_derivative_expansion(&q);
                let top = variance_expansion_terms(&q)[d];
                assert!(top >= 1.0 / factorial(d as u32) - 1e-12);
                assert!(var >= 1.0 / factorial(d as u32) - 1e-12);
            }
        }
    }

    #[test]
    fn sharpness_matches_chi_square_closed_form() {
        // Var = n^{-l} prod_{j=0}^{2l-2} (n + 2j), from rotation invariance
        for (n, ell) in [(1usize, 1usize), (2, 2), (4, 2), (3, 3), (5, 3)] {
            let q = sharpness_polynomial(n, ell).unwrap();
            let closed: f64 = (0..=2 * ell - 2).map(|j| (n + 2 * j) as f64).product::<f64>()
                / (n as f64).powi(ell as i32);
            let v = polynomial_variance_moments(&q);
            assert!((v - closed).abs() < 1e-10 * closed, "n={n} l={ell}: {v} vs {closed}");
        }
        let q = sharpness_polynomial(4, 1).unwrap();
        assert!((polynomial_variance_moments(&q) - 1.0).abs() < 1e-14);
        // l = 2: every coefficient is 1/n, n^2 of them
        let q = sharpness_polynomial(6, 2).unwrap();
        assert!((coefficient_norm_sq(&q) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sharpness_ratio_within_factor_two() {
        let v2 = polynomial_variance_moments(&sharpness_polynomial(2, 2).unwrap());
        let v4 = polynomial_variance_moments(&sharpness_polynomial(4, 2).unwrap());
        let ratio = v4 / v2;
        assert!((1.0..=4.0).contains(&ratio), "{ratio}");
    }
}
