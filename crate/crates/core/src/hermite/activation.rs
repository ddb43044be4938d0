use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::basis::PolynomialCoefficients;
use super::quadrature::{gauss_hermite, gauss_legendre, normal_pdf, normal_tail_bound, HalfLineRule};
use crate::error::{Error, Result};

/// Largest Gaussian mass a tabulated activation may leave outside its grid.
pub const TABULATED_TAIL_TOLERANCE: f64 = 1e-12;

const LEGENDRE_NODES_PER_SEGMENT: usize = 16;
const MAX_SUBINTERVAL: f64 = 0.5;

/// Piecewise-linear activation on a strictly increasing grid, clamped to the
/// end values outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedActivation {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedActivation {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::InvalidActivation(
                "tabulated activation needs matching grid/value lists of length >= 2".into(),
            ));
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidActivation("non-finite tabulated entry".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidActivation("grid must be strictly increasing".into()));
        }
        let lo = grid[0];
        let hi = grid[grid.len() - 1];
        let tail_mass = normal_tail_bound(-lo) + normal_tail_bound(hi);
        if tail_mass > TABULATED_TAIL_TOLERANCE {
            return Err(Error::TabulatedRangeTooNarrow { lo, hi, tail_mass });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return self.values[0];
        }
        if x >= g[g.len() - 1] {
            return self.values[g.len() - 1];
        }
        let i = g.partition_point(|&t| t <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }
}

/// Activation function `sigma` of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Polynomial(PolynomialCoefficients),
    Tabulated(TabulatedActivation),
}

impl Activation {
    /// Polynomial activation; trailing zero coefficients are dropped so the
    /// leading coefficient is nonzero (or the polynomial is constant).
    pub fn polynomial(mut a: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidActivation("polynomial needs finite coefficients".into()));
        }
        while a.len() > 1 && a[a.len() - 1] == 0.0 {
            a.pop();
        }
        Ok(Activation::Polynomial(PolynomialCoefficients::new(a)))
    }

    pub fn identity() -> Self {
        Activation::Polynomial(PolynomialCoefficients::new(vec![0.0, 1.0]))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Polynomial(p) => p.eval(x),
            Activation::Tabulated(t) => t.eval(x),
        }
    }

    pub fn as_polynomial(&self) -> Option<&PolynomialCoefficients> {
        match self {
            Activation::Polynomial(p) => Some(p),
            _ => None,
        }
    }

    /// `int sigma(x) g(x) dgamma(x)` with the rule suited to the activation's
    /// regularity; `order` is the node count of the underlying Gauss rule.
    pub(crate) fn integrate_against<G: Fn(f64) -> f64>(&self, order: usize, g: G) -> f64 {
        self.integrator(order).against(g)
    }

    /// A reusable integrator so expansions build the rule once.
    pub(crate) fn integrator(&self, order: usize) -> Integrator<'_> {
        let kind = match self {
            Activation::Relu => IntegratorKind::Kink(HalfLineRule::new(order)),
            Activation::Tabulated(_) => IntegratorKind::Tabulated,
            _ => IntegratorKind::Smooth(gauss_hermite(order)),
        };
        Integrator { activation: self, kind }
    }
}

pub(crate) struct Integrator<'a> {
    activation: &'a Activation,
    kind: IntegratorKind,
}

enum IntegratorKind {
    Smooth(super::quadrature::GaussRule),
    Kink(HalfLineRule),
    Tabulated,
}

impl Integrator<'_> {
    /// `int sigma * g dgamma`.
    pub(crate) fn against<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        match (&self.kind, self.activation) {
            // ReLU is x on the right half-line and 0 on the left.
            (IntegratorKind::Kink(rule), _) => rule.integrate(|x| x * g(x)),
            (IntegratorKind::Smooth(rule), act) => rule.integrate(|x| act.eval(x) * g(x)),
            (IntegratorKind::Tabulated, Activation::Tabulated(t)) => integrate_tabulated(t, &g),
            _ => unreachable!("integrator kind always matches its activation"),
        }
    }

    /// `int sigma^2 dgamma`.
    pub(crate) fn norm_sq(&self) -> f64 {
        match (&self.kind, self.activation) {
            (IntegratorKind::Kink(rule), _) => rule.integrate(|x| x * x),
            (IntegratorKind::Smooth(rule), act) => rule.integrate(|x| act.eval(x).powi(2)),
            (IntegratorKind::Tabulated, Activation::Tabulated(t)) => {
                integrate_tabulated(t, &|x| t.eval(x))
            }
            _ => unreachable!("integrator kind always matches its activation"),
        }
    }
}

fn integrate_tabulated<G: Fn(f64) -> f64>(t: &TabulatedActivation, g: &G) -> f64 {
    let rule = gauss_legendre(LEGENDRE_NODES_PER_SEGMENT);
    let mut total = 0.0;
    for w in t.grid.windows(2) {
        let pieces = ((w[1] - w[0]) / MAX_SUBINTERVAL).ceil().max(1.0) as usize;
        let step = (w[1] - w[0]) / pieces as f64;
        for p in 0..pieces {
            let a = w[0] + p as f64 * step;
            let half = 0.5 * step;
            let mid = a + half;
            total += half
                * rule.integrate(|u| {
                    let x = mid + half * u;
                    t.eval(x) * g(x) * normal_pdf(x)
                });
        }
    }
    total
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Tanh => write!(f, "tanh"),
            Activation::Polynomial(p) => {
                let parts: Vec<String> = p.a.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Activation::Tabulated(t) => write!(f, "tabulated[{} points]", t.grid.len()),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `relu`, `tanh`, `identity` and `poly:a0,a1,...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::identity()),
            _ => {
                let body = s.strip_prefix("poly:").ok_or_else(|| {
                    Error::InvalidActivation(format!("unknown activation '{s}'"))
                })?;
                Activation::polynomial(parse_coefficients(body)?)
            }
        }
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_coefficients(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidActivation(format!("bad coefficient '{t}'")))
        })
        .collect()
}
