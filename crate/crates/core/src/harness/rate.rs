use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::fit::{fit_loglog_slope, RateFit, MIN_FIT_POINTS};
use crate::error::{Error, Result};
use crate::hermite::Activation;
use crate::process::rng::derive_seed;
use crate::process::{
    kernel_expansion, nngp_kernel, sample_gp_marginal, sample_marginal, sphere_sample, KernelMatrix, PointSet,
    ProcessMarginalSample,
};
use crate::transport::{
    bound_theorem31, bound_theorem34, bound_theorem51, marginal_transport_estimate_with, quadratic_reference_rate,
    BoundConstants, BoundSpec, TransportEstimate, TransportOptions,
};

/// One width of the rate experiment. `estimate` uses the first `N` samples
/// per side with a bootstrap interval; `estimate_2n` uses all `2N` and is a
/// point estimate, there to expose the finite-sample bias trend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub k: usize,
    pub estimate: Option<TransportEstimate>,
    pub estimate_2n: Option<TransportEstimate>,
    pub bound: Option<BoundSpec>,
    /// `n^3/k` when the activation is `x^2`.
    pub reference: Option<BoundSpec>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub config_hash: String,
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
    pub fit_2n: Option<RateFit>,
    /// Why a fit is missing.
    pub fit_error: Option<String>,
}

impl RateReport {
    pub fn successes(&self) -> usize {
        self.rows.iter().filter(|r| r.estimate.is_some()).count()
    }
}

/// `(monomial degree, coefficient)` when exactly one coefficient is nonzero.
fn single_monomial(activation: &Activation) -> Option<(usize, f64)> {
    let p = activation.as_polynomial()?;
    let mut nonzero = p.a.iter().enumerate().filter(|(_, a)| **a != 0.0);
    let (d, a) = nonzero.next()?;
    nonzero.next().is_none().then_some((d, *a))
}

/// The rate bound matching the activation: the monomial bound for `x^d`,
/// the polynomial bound for other polynomials, the general bound otherwise.
pub fn applicable_bound(activation: &Activation, n: usize, k: usize, constants: BoundConstants) -> Result<BoundSpec> {
    let k = k as f64;
    if let Some((d, _)) = single_monomial(activation).filter(|(_, a)| a.abs() == 1.0) {
        return bound_theorem34(n, k, d, constants);
    }
    if let Some(p) = activation.as_polynomial() {
        if p.degree() == 0 {
            return Err(Error::InvalidParameter("constant activation has no rate bound".into()));
        }
        return bound_theorem31(n, k, p.degree(), p.max_sq(), constants);
    }
    let expansion = kernel_expansion(activation)?;
    let max_sq = expansion.coefficients.iter().fold(0.0f64, |m, c| m.max(c * c));
    let top = expansion.max_degree();
    let remainder = |d: usize| expansion.remainder(d.min(top)).unwrap_or(f64::NAN);
    bound_theorem51(n, k, max_sq, &remainder, constants)
}

fn reference_rate(activation: &Activation, n: usize, k: usize) -> Option<BoundSpec> {
    match single_monomial(activation) {
        Some((2, a)) if a.abs() == 1.0 => quadratic_reference_rate(n, k as f64).ok(),
        _ => None,
    }
}

fn head(sample: &ProcessMarginalSample, rows: usize) -> ProcessMarginalSample {
    ProcessMarginalSample {
        values: sample.values.rows(0, rows).into_owned(),
        points: sample.points.clone(),
        metadata: sample.metadata.clone(),
    }
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    points: PointSet,
    kernel: KernelMatrix,
    opts: TransportOptions,
}

fn estimates(shared: &Shared, k: usize) -> Result<(TransportEstimate, TransportEstimate)> {
    let cfg = shared.cfg;
    let reps = 2 * cfg.reps;
    let network = sample_marginal(k, &cfg.activation, &shared.points, reps, derive_seed(cfg.network_seed, 0, k as u64))?;
    let gp = sample_gp_marginal(&shared.kernel, &shared.points, reps, derive_seed(cfg.gp_seed, 0, k as u64), 0.0)?;
    let opts = TransportOptions { seed: derive_seed(shared.opts.seed, 0, k as u64), ..shared.opts };
    let small = marginal_transport_estimate_with(&head(&network, cfg.reps), &head(&gp, cfg.reps), &opts)?;
    let large = marginal_transport_estimate_with(&network, &gp, &TransportOptions { bootstrap: 0, ..opts })?;
    Ok((small, large))
}

fn row(shared: &Shared, k: usize) -> RateRow {
    let cfg = shared.cfg;
    let mut errors = Vec::new();
    let (estimate, estimate_2n) = match estimates(shared, k) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(e) => {
            errors.push(format!("estimate: {e}"));
            (None, None)
        }
    };
    let bound = applicable_bound(&cfg.activation, cfg.n, k, cfg.constants)
        .map_err(|e| errors.push(format!("bound: {e}")))
        .ok();
    RateRow {
        k,
        estimate,
        estimate_2n,
        bound,
        reference: reference_rate(&cfg.activation, cfg.n, k),
        error: (!errors.is_empty()).then(|| errors.join("; ")),
    }
}

fn fit_of(rows: &[RateRow], pick: impl Fn(&RateRow) -> Option<f64>) -> Result<RateFit> {
    let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|r| pick(r).map(|v| (r.k as f64, v))).collect();
    if pairs.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "only {} of {} widths succeeded; fit needs {MIN_FIT_POINTS}",
            pairs.len(),
            rows.len()
        )));
    }
    fit_loglog_slope(&pairs)
}

/// Marginal transport between width-`k` networks and the Gaussian limit for
/// every `k` in the grid, with the matching rate bound and a log-log fit.
/// Widths are processed in parallel and reported in grid order.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let points = sphere_sample(cfg.n, cfg.points, cfg.point_seed)?;
    let kernel = nngp_kernel(&kernel_expansion(&cfg.activation)?, &points)?;
    let shared = Shared { cfg, points, kernel, opts: cfg.transport_options() };
    let rows: Vec<RateRow> = cfg.k_grid.par_iter().map(|&k| row(&shared, k)).collect();
    let fit = fit_of(&rows, |r| r.estimate.as_ref().map(|e| e.value));
    let fit_2n = fit_of(&rows, |r| r.estimate_2n.as_ref().map(|e| e.value)).ok();
    let fit_error = fit.as_ref().err().map(|e| e.to_string());
    Ok(RateReport { config_hash: cfg.hash(), rows, fit: fit.ok(), fit_2n, fit_error })
}

/// `(k, value)` of the successful `N`-sample estimates.
pub fn rate_pairs(report: &RateReport) -> Vec<(usize, f64)> {
    report.rows.iter().filter_map(|r| r.estimate.as_ref().map(|e| (r.k, e.value))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_text(&format!("reps = 64\nbootstrap = 4\npoints = 3\n{text}")).unwrap()
    }

    #[test]
    fn rows_follow_grid_and_carry_bounds() {
        let cfg = small("k_grid = 4, 16, 64, 256");
        let report = run_rate_experiment(&cfg).unwrap();
        assert_eq!(report.rows.iter().map(|r| r.k).collect::<Vec<_>>(), cfg.k_grid);
        assert!(report.fit.is_some() && report.fit_error.is_none());
        for r in &report.rows {
            let e = r.estimate.as_ref().unwrap();
            assert!(e.ci_low <= e.value && e.value <= e.ci_high);
            assert_eq!(e.samples, 64);
            assert_eq!(r.estimate_2n.as_ref().unwrap().samples, 128);
            let b = r.bound.as_ref().unwrap();
            assert_eq!(b.kind, crate::transport::BoundKind::Monomial);
            assert!((r.reference.as_ref().unwrap().value() - 27.0 / r.k as f64).abs() < 1e-9);
        }
        assert_eq!(run_rate_experiment(&cfg).unwrap(), report);
    }

    #[test]
    fn fit_skipped_with_too_few_widths() {
        let report = run_rate_experiment(&small("k_grid = 16, 64, 256")).unwrap();
        assert!(report.fit.is_none());
        assert!(report.fit_error.unwrap().contains("3 of 3"));
    }

    #[test]
    fn general_activation_records_bound_failure_per_row() {
        let report = run_rate_experiment(&small("activation = relu\nk_grid = 8, 16, 32, 64")).unwrap();
        assert!(report.rows[0].bound.is_none() && report.rows[0].error.is_some());
        assert!(report.rows[0].estimate.is_some());
        assert!(report.rows[1..].iter().all(|r| r.bound.is_some() && r.error.is_none()));
        assert!(report.fit.is_some());
    }

    #[test]
    fn bound_selection() {
        let c = BoundConstants::default();
        let mono = Activation::polynomial(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(applicable_bound(&mono, 3, 64, c).unwrap().kind, crate::transport::BoundKind::Monomial);
        let poly = Activation::polynomial(vec![1.0, 0.0, 2.0]).unwrap();
        let b = applicable_bound(&poly, 3, 64, c).unwrap();
        assert_eq!((b.kind, b.max_sq_coef), (crate::transport::BoundKind::Polynomial, Some(4.0)));
        let tanh = applicable_bound(&Activation::Tanh, 3, 64, c).unwrap();
        assert_eq!(tanh.kind, crate::transport::BoundKind::General);
        assert!(applicable_bound(&Activation::polynomial(vec![2.0]).unwrap(), 3, 64, c).is_err());
    }
}
