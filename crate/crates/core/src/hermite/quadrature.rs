//! Gaussian quadrature rules used to project activations onto the Hermite basis.
//!
//! All rules are built the same way: Golub–Welsch eigenvalues of the Jacobi
//! matrix give the nodes, a few Newton steps on the orthonormal recurrence
//! polish them, and the weights come from the Christoffel function
//! `1 / sum_j p_j(x)^2`. The last step keeps tiny tail weights accurate to
//! full relative precision, which matters once they multiply `h_m(x)` for
//! large `m` and large `|x|`.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

/// Nodes and weights for `sum_i w_i f(x_i) ~ int f dmu`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = Neumaier::default();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.sum()
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Three-term recurrence `x p_j = b_{j+1} p_{j+1} + a_j p_j + b_j p_{j-1}` of an
/// orthonormal family, with total mass `mass` of the measure.
struct Recurrence<A, B> {
    diag: A,
    off: B,
    mass: f64,
}

impl<A: Fn(usize) -> f64, B: Fn(usize) -> f64> Recurrence<A, B> {
    /// Returns `(p_n(x), p_n'(x), log(sum_{j<n} p_j(x)^2))`, with `p_n` and
    /// `p_n'` sharing an arbitrary common scale.
    fn evaluate(&self, n: usize, x: f64) -> (f64, f64, f64) {
        let mut p_prev = 0.0;
        let mut p = 1.0 / self.mass.sqrt();
        let mut dp_prev = 0.0;
        let mut dp = 0.0;
        let mut sum_sq = 0.0;
        let mut log_scale = 0.0;
        for j in 0..n {
            sum_sq += p * p;
            let b_next = (self.off)(j + 1);
            let b_cur = if j == 0 { 0.0 } else { (self.off)(j) };
            let a = (self.diag)(j);
            let p_next = ((x - a) * p - b_cur * p_prev) / b_next;
            let dp_next = ((x - a) * dp + p - b_cur * dp_prev) / b_next;
            p_prev = p;
            p = p_next;
            dp_prev = dp;
            dp = dp_next;
            let mag = p.abs().max(p_prev.abs());
            if mag > 1e100 {
                let s = 1e-100;
                p *= s;
                p_prev *= s;
                dp *= s;
                dp_prev *= s;
                sum_sq *= s * s;
                log_scale += s.ln();
            }
        }
        (p, dp, sum_sq.ln() - 2.0 * log_scale)
    }

    fn rule(&self, n: usize) -> GaussRule {
        assert!(n >= 1, "quadrature order must be positive");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            jacobi[(j, j)] = (self.diag)(j);
            if j + 1 < n {
                let b = (self.off)(j + 1);
                jacobi[(j, j + 1)] = b;
                jacobi[(j + 1, j)] = b;
            }
        }
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp, _) = self.evaluate(n, *x);
                if dp == 0.0 || !dp.is_finite() {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() <= 1e-15 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, _, log_sum) = self.evaluate(n, *x);
            weights.push((-log_sum).exp());
        }
        GaussRule { nodes, weights }
    }
}

/// Gauss–Hermite rule for the standard Gaussian measure `e^{-x^2/2}/sqrt(2 pi) dx`.
///
/// Nodes are symmetrized so odd integrands cancel to rounding.
pub fn gauss_hermite(order: usize) -> GaussRule {
    let rec = Recurrence {
        diag: |_| 0.0,
        off: |j: usize| (j as f64).sqrt(),
        mass: 1.0,
    };
    let mut rule = rec.rule(order);
    let n = rule.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        let w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = w;
        rule.weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    rule
}

/// Generalized Gauss–Laguerre rule for `t^alpha e^{-t} dt` on `[0, inf)`.
pub fn gauss_laguerre(order: usize, alpha: f64) -> GaussRule {
    let rec = Recurrence {
        diag: move |j: usize| 2.0 * j as f64 + alpha + 1.0,
        off: move |j: usize| (j as f64 * (j as f64 + alpha)).sqrt(),
        mass: gamma_half_integer(alpha),
    };
    rec.rule(order)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> GaussRule {
    let rec = Recurrence {
        diag: |_| 0.0,
        off: |j: usize| {
            let j = j as f64;
            j / (4.0 * j * j - 1.0).sqrt()
        },
        mass: 2.0,
    };
    rec.rule(order)
}

// Only the two values the half-line rules need.
fn gamma_half_integer(alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if alpha == -0.5 {
        PI.sqrt()
    } else if alpha == 0.5 {
        0.5 * PI.sqrt()
    } else {
        panic!("unsupported Laguerre exponent {alpha}")
    }
}

/// Quadrature for `int_0^inf F(x) phi(x) dx` that is exact whenever `F` is a
/// polynomial of degree below `4 * order - 1`.
///
/// `F` is split into its even and odd parts; after `t = x^2 / 2` the even part
/// becomes a Laguerre integral with exponent `-1/2` and the odd part (divided
/// by `x`) one with exponent `0`. Evaluation therefore needs `F` at `+-x`,
/// i.e. the analytic continuation of the piece living on `x > 0`.
#[derive(Debug, Clone)]
pub struct HalfLineRule {
    even: GaussRule,
    odd: GaussRule,
}

impl HalfLineRule {
    pub fn new(order: usize) -> Self {
        let le = gauss_laguerre(order, -0.5);
        let even = GaussRule {
            nodes: le.nodes.iter().map(|t| (2.0 * t).sqrt()).collect(),
            weights: le.weights.iter().map(|w| w / (2.0 * PI.sqrt())).collect(),
        };
        let lo = gauss_laguerre(order, 0.0);
        let nodes: Vec<f64> = lo.nodes.iter().map(|t| (2.0 * t).sqrt()).collect();
        let weights = lo
            .weights
            .iter()
            .zip(&nodes)
            .map(|(w, y)| w / ((2.0 * PI).sqrt() * y))
            .collect();
        let odd = GaussRule { nodes, weights };
        Self { even, odd }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let e = self.even.integrate(|x| 0.5 * (f(x) + f(-x)));
        let o = self.odd.integrate(|y| 0.5 * (f(y) - f(-y)));
        e + o
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Mills-ratio upper bound on `P(X > t)` for standard normal `X`; `0.5` for `t <= 0`.
pub fn normal_tail_bound(t: f64) -> f64 {
    if t <= 0.0 {
        0.5
    } else {
        (normal_pdf(t) / t).min(0.5)
    }
}
