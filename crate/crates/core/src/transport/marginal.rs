use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment::{matching_cost, ASSIGNMENT_CAP};
use super::estimate::{rows_of, sq_dist, EmpiricalSample, Estimator, Normalization, TransportEstimate};
use super::sinkhorn::{sinkhorn_rows, DEFAULT_EPSILON_FACTOR, DEFAULT_SINKHORN_ITERS, SINKHORN_TOLERANCE};
use crate::error::{Error, Result};
use crate::process::rng::{stream_rng, streams};
use crate::process::ProcessMarginalSample;

pub const DEFAULT_BOOTSTRAP: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    Exact,
    Sinkhorn,
    /// Sorted samples in one dimension, assignment up to the size cap,
    /// Sinkhorn beyond.
    Auto,
}

impl std::str::FromStr for TransportMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Self::Exact),
            "sinkhorn" => Ok(Self::Sinkhorn),
            "auto" => Ok(Self::Auto),
            other => Err(Error::InvalidParameter(format!("unknown transport method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    pub method: TransportMethod,
    /// Bootstrap resamples for the interval; 0 gives a degenerate interval.
    pub bootstrap: usize,
    pub seed: u64,
    /// Sinkhorn `epsilon` as a fraction of the median pairwise cost.
    pub epsilon_factor: f64,
    pub max_iters: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            method: TransportMethod::Auto,
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            epsilon_factor: DEFAULT_EPSILON_FACTOR,
            max_iters: DEFAULT_SINKHORN_ITERS,
        }
    }
}

enum Plan {
    Sorted,
    Assignment,
    Sinkhorn(f64),
}

fn median_scaled_cost(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> f64 {
    let mut c: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| sq_dist(x, y) * scale)).collect();
    let mid = c.len() / 2;
    *c.select_nth_unstable_by(mid, f64::total_cmp).1
}

fn plan(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64, opts: &TransportOptions) -> Result<Plan> {
    let equal = a.len() == b.len();
    let m = a[0].len();
    let sinkhorn = || Plan::Sinkhorn(opts.epsilon_factor * median_scaled_cost(a, b, scale));
    Ok(match opts.method {
        TransportMethod::Exact => {
            if !equal {
                return Err(Error::Shape("exact transport needs equal sample sizes".into()));
            }
            if a.len() > ASSIGNMENT_CAP {
                return Err(Error::AssignmentCap { size: a.len(), cap: ASSIGNMENT_CAP });
            }
            if m == 1 {
                Plan::Sorted
            } else {
                Plan::Assignment
            }
        }
        TransportMethod::Sinkhorn => sinkhorn(),
        TransportMethod::Auto => {
            if equal && m == 1 {
                Plan::Sorted
            } else if equal && a.len() <= ASSIGNMENT_CAP {
                Plan::Assignment
            } else {
                sinkhorn()
            }
        }
    })
}

fn run(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64, plan: &Plan, max_iters: usize) -> Result<(f64, Estimator)> {
    Ok(match *plan {
        Plan::Sorted => {
            let mut x: Vec<f64> = a.iter().map(|r| r[0]).collect();
            let mut y: Vec<f64> = b.iter().map(|r| r[0]).collect();
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            let v = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() * scale / x.len() as f64;
            (v, Estimator::Sorted1d)
        }
        Plan::Assignment => (matching_cost(a, b, scale), Estimator::Assignment),
        Plan::Sinkhorn(epsilon) => {
            let (v, iterations, violation) = sinkhorn_rows(a, b, scale, epsilon, max_iters)?;
            (v, Estimator::Sinkhorn { epsilon, iterations, violation, converged: violation <= SINKHORN_TOLERANCE })
        }
    })
}

/// `W_2^2` between two clouds with per-point cost `scale |x - y|^2`, plus a
/// bootstrap interval `value +- 1.96 sd` over resampled rows.
pub(crate) fn estimate_rows(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    scale: f64,
    normalization: Normalization,
    opts: &TransportOptions,
) -> Result<TransportEstimate> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Shape("empty sample".into()));
    }
    let plan = plan(a, b, scale, opts)?;
    let (value, estimator) = run(a, b, scale, &plan, opts.max_iters)?;
    let value = value.max(0.0);
    let mut estimate = TransportEstimate::point(value, estimator, normalization, a.len().min(b.len()));
    if opts.bootstrap >= 2 {
        let boots: Vec<f64> = (0..opts.bootstrap)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(opts.seed, streams::BOOTSTRAP, r as u64);
                let ra: Vec<Vec<f64>> = (0..a.len()).map(|_| a[rng.random_range(0..a.len())].clone()).collect();
                let rb: Vec<Vec<f64>> = (0..b.len()).map(|_| b[rng.random_range(0..b.len())].clone()).collect();
                run(&ra, &rb, scale, &plan, opts.max_iters).map(|(v, _)| v)
            })
            .collect::<Result<_>>()?;
        let mean = boots.iter().sum::<f64>() / boots.len() as f64;
        let sd = (boots.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (boots.len() as f64 - 1.0)).sqrt();
        estimate.ci_low = (value - 1.96 * sd).max(0.0);
        estimate.ci_high = value + 1.96 * sd;
    }
    Ok(estimate)
}

/// `W_2^2` between two empirical samples on the raw cost.
pub fn estimate_w2(a: &EmpiricalSample, b: &EmpiricalSample, opts: &TransportOptions) -> Result<TransportEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    estimate_rows(&rows_of(&a.values), &rows_of(&b.values), 1.0, Normalization::Raw, opts)
}

/// Empirical `W_2^2` between two `m`-point marginal laws with cost
/// `|x - y|^2 / m`.
///
/// Any coupling of the two processes induces a coupling of their marginals,
/// and `|x - y|^2 / m` is a Monte Carlo average of the squared gap over the
/// sphere points, so this estimates a lower bound on the functional `W_2^2`.
pub fn marginal_transport_estimate(a: &ProcessMarginalSample, b: &ProcessMarginalSample) -> Result<TransportEstimate> {
    marginal_transport_estimate_with(a, b, &TransportOptions::default())
}

pub fn marginal_transport_estimate_with(
    a: &ProcessMarginalSample,
    b: &ProcessMarginalSample,
    opts: &TransportOptions,
) -> Result<TransportEstimate> {
    if a.points != b.points {
        return Err(Error::Shape("marginal samples are taken at different point sets".into()));
    }
    let m = a.points.len();
    estimate_rows(&rows_of(&a.values), &rows_of(&b.values), 1.0 / m as f64, Normalization::PerPoint { m }, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::Activation;
    use crate::process::{kernel_expansion, nngp_kernel, sample_gp_marginal, sample_marginal, sphere_sample};
    use crate::transport::w2_1d;

    #[test]
    fn identical_and_mismatched() {
        let pts = sphere_sample(3, 2, 1).unwrap();
        let a = sample_marginal(4, &Activation::Relu, &pts, 64, 1).unwrap();
        let e = marginal_transport_estimate(&a, &a).unwrap();
        assert_eq!((e.value, e.ci_low), (0.0, 0.0));
        let other = sample_marginal(4, &Activation::Relu, &sphere_sample(3, 2, 2).unwrap(), 64, 1).unwrap();
        assert!(marginal_transport_estimate(&a, &other).is_err());
    }

    #[test]
    fn single_point_matches_sorted() {
        let pts = sphere_sample(3, 1, 1).unwrap();
        let act = Activation::polynomial(vec![0.0, 0.0, 1.0]).unwrap();
        let a = sample_marginal(4, &act, &pts, 200, 1).unwrap();
        let k = nngp_kernel(&kernel_expansion(&act).unwrap(), &pts).unwrap();
        let b = sample_gp_marginal(&k, &pts, 200, 2, 0.0).unwrap();
        let est = marginal_transport_estimate(&a, &b).unwrap();
        let direct = w2_1d(a.values.as_slice(), b.values.as_slice()).unwrap().value;
        assert_eq!(est.value, direct);
        assert!(est.ci_low <= est.value && est.value <= est.ci_high);
        let exact = marginal_transport_estimate_with(&a, &b, &TransportOptions { method: TransportMethod::Exact, ..Default::default() }).unwrap();
        assert_eq!(exact.value, direct);
    }

    #[test]
    fn assignment_path_agrees_with_sorted_in_one_dimension() {
        let a: Vec<Vec<f64>> = (0..100).map(|i| vec![((i * 37) % 101) as f64 / 10.0]).collect();
        let b: Vec<Vec<f64>> = (0..100).map(|i| vec![((i * 53) % 97) as f64 / 7.0]).collect();
        let sorted = run(&a, &b, 1.0, &Plan::Sorted, 1).unwrap().0;
        let assigned = run(&a, &b, 1.0, &Plan::Assignment, 1).unwrap().0;
        assert!((sorted - assigned).abs() <= 1e-12 * sorted);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let pts = sphere_sample(3, 3, 1).unwrap();
        let a = sample_marginal(4, &Activation::Tanh, &pts, 80, 1).unwrap();
        let b = sample_marginal(64, &Activation::Tanh, &pts, 80, 2).unwrap();
        let x = marginal_transport_estimate(&a, &b).unwrap();
        let y = marginal_transport_estimate(&a, &b).unwrap();
        assert_eq!(x, y);
        assert!(x.ci_low < x.ci_high);
        assert_eq!(x.normalization, Normalization::PerPoint { m: 3 });
    }
}
