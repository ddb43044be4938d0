//! Normalized (probabilists') Hermite polynomials and conversions between the
//! Hermite and monomial bases.

use super::quadrature::Neumaier;
use serde::{Deserialize, Serialize};

/// Monomial coefficients `a_0..a_d` of a univariate polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialCoefficients {
    pub a: Vec<f64>,
}

impl PolynomialCoefficients {
    pub fn new(a: Vec<f64>) -> Self {
        assert!(!a.is_empty(), "polynomial needs at least a constant term");
        Self { a }
    }

    /// Nominal degree, i.e. `len - 1` (trailing zeros are kept).
    pub fn degree(&self) -> usize {
        self.a.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_sq(&self) -> f64 {
        self.max_abs().powi(2)
    }

    pub fn abs_sum(&self) -> f64 {
        self.a.iter().map(|c| c.abs()).sum()
    }

    /// Is this `c * x^d` for its nominal degree `d`?
    pub fn is_monomial(&self) -> bool {
        let d = self.degree();
        self.a[d] != 0.0 && self.a[..d].iter().all(|&c| c == 0.0)
    }
}

/// `h_m(x)` via `h_{m+1} = (x h_m - sqrt(m) h_{m-1}) / sqrt(m+1)`.
pub fn hermite_eval(m: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..m {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[h_0(x), ..., h_max(x)]`.
pub fn hermite_values(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for j in 1..max {
        let next = (x * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// `h_m(0)`: zero for odd `m`, `(-1)^{m/2} (m-1)!! / sqrt(m!)` for even `m`.
pub fn hermite_at_zero(m: usize) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    // (m-1)!!/sqrt(m!) = prod_{j odd < m} sqrt(j/(j+1))
    let mut v = 1.0;
    let mut j = 1;
    while j < m {
        v *= (j as f64 / (j + 1) as f64).sqrt();
        j += 2;
    }
    if (m / 2) % 2 == 1 {
        -v
    } else {
        v
    }
}

pub(crate) fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Monomial coefficient of `x^{m-2j}` in `h_m`: `sqrt(m!) (-1)^j / (j! (m-2j)! 2^j)`.
fn hermite_monomial_coef(m: usize, j: usize) -> f64 {
    let log = 0.5 * ln_factorial(m)
        - ln_factorial(j)
        - ln_factorial(m - 2 * j)
        - j as f64 * std::f64::consts::LN_2;
    let v = log.exp();
    if j % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Converts `sum_m c_m h_m` (`m = 0..=d`) into monomial coefficients.
pub fn hermite_to_monomial(hermite_coeffs: &[f64], d: usize) -> PolynomialCoefficients {
    assert_eq!(hermite_coeffs.len(), d + 1, "need d + 1 Hermite coefficients");
    let mut acc = vec![Neumaier::default(); d + 1];
    for (m, &c) in hermite_coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for j in 0..=m / 2 {
            acc[m - 2 * j].add(c * hermite_monomial_coef(m, j));
        }
    }
    PolynomialCoefficients::new(acc.iter().map(Neumaier::sum).collect())
}

/// Inverse of [`hermite_to_monomial`], using
/// `x^k = sum_j k! / (j! (k-2j)! 2^j) sqrt((k-2j)!) h_{k-2j}`.
pub fn monomial_to_hermite(poly: &PolynomialCoefficients) -> Vec<f64> {
    let d = poly.degree();
    let mut acc = vec![Neumaier::default(); d + 1];
    for (k, &a) in poly.a.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for j in 0..=k / 2 {
            let log = ln_factorial(k) - ln_factorial(j) - 0.5 * ln_factorial(k - 2 * j)
                - j as f64 * std::f64::consts::LN_2;
            acc[k - 2 * j].add(a * log.exp());
        }
    }
    acc.iter().map(Neumaier::sum).collect()
}
