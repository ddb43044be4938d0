//! Debiased entropic transport in the log domain.

use rayon::prelude::*;

use super::assignment::cost_matrix;
use super::estimate::{rows_of, EmpiricalSample, Estimator, Normalization, TransportEstimate};
use crate::error::{Error, Result};

/// Total-variation marginal violation at which iterations stop.
pub const SINKHORN_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_SINKHORN_ITERS: usize = 5_000;
/// Default `epsilon` as a fraction of the median pairwise cost.
pub const DEFAULT_EPSILON_FACTOR: f64 = 0.05;

/// Median of all pairwise costs `scale * |a_i - b_j|^2`.
pub fn median_cost(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let mut c = cost_matrix(&rows_of(&a.values), &rows_of(&b.values), 1.0);
    let mid = c.len() / 2;
    let (_, m, _) = c.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

struct Solution {
    /// `<a, f> + <b, g>` at the returned potentials.
    value: f64,
    iterations: usize,
    violation: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn transpose(cost: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; cost.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = cost[i * cols + j];
        }
    }
    t
}

/// `-eps * LSE_j(log_w + (pot_j - c_ij) / eps)` for every row `i` of `cost`.
fn soft_min(cost: &[f64], pot: &[f64], log_w: f64, eps: f64) -> Vec<f64> {
    let cols = pot.len();
    cost.par_chunks(cols)
        .map(|row| -eps * log_sum_exp(row.iter().zip(pot).map(|(c, p)| log_w + (p - c) / eps)))
        .collect()
}

/// `sum_i |exp(log_a + (f_i - t_i)/eps) - exp(log_a)|`: the row-marginal
/// violation of potentials `f` whose soft-min update is `t`.
fn violation(f: &[f64], t: &[f64], log_a: f64, eps: f64) -> f64 {
    f.iter().zip(t).map(|(fi, ti)| ((log_a + (fi - ti) / eps).exp() - log_a.exp()).abs()).sum()
}

/// Entropic OT between uniform measures on the rows and columns of `cost`,
/// by alternating log-domain Sinkhorn updates from zero potentials. Column
/// marginals are exact after each `g` update; iteration stops once the row
/// violation is below the tolerance.
fn entropic_ot(cost: &[f64], rows: usize, cols: usize, epsilon: f64, max_iters: usize) -> Result<Solution> {
    let cost_t = transpose(cost, rows, cols);
    let log_a = -(rows as f64).ln();
    let log_b = -(cols as f64).ln();
    let mut f = vec![0.0; rows];
    let mut g = soft_min(&cost_t, &f, log_a, epsilon);
    let mut viol = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let t = soft_min(cost, &g, log_b, epsilon);
        viol = violation(&f, &t, log_a, epsilon);
        if viol <= SINKHORN_TOLERANCE {
            break;
        }
        f = t;
        g = soft_min(&cost_t, &f, log_a, epsilon);
    }
    let value = f.iter().sum::<f64>() / rows as f64 + g.iter().sum::<f64>() / cols as f64;
    Ok(Solution { value, iterations, violation: viol })
}

/// Entropic OT of a uniform cloud with itself, using the averaged symmetric
/// update `f <- (f + T f) / 2`, which converges far faster than alternating
/// updates on this problem.
fn entropic_self_ot(cost: &[f64], size: usize, epsilon: f64, max_iters: usize) -> Result<Solution> {
    let log_a = -(size as f64).ln();
    let mut f = vec![0.0; size];
    let mut viol = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let t = soft_min(cost, &f, log_a, epsilon);
        viol = violation(&f, &t, log_a, epsilon);
        if viol <= SINKHORN_TOLERANCE {
            break;
        }
        f.iter_mut().zip(&t).for_each(|(fi, ti)| *fi = 0.5 * (*fi + ti));
    }
    Ok(Solution { value: 2.0 * f.iter().sum::<f64>() / size as f64, iterations, violation: viol })
}

fn lex_less(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let flat = |x: &[Vec<f64>]| x.iter().flatten().copied().collect::<Vec<f64>>();
    (a.len(), flat(a)).partial_cmp(&(b.len(), flat(b))) == Some(std::cmp::Ordering::Less)
}

pub(crate) fn sinkhorn_rows(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    scale: f64,
    epsilon: f64,
    max_iters: usize,
) -> Result<(f64, usize, f64)> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    // the cross problem is solved in a canonical orientation so that swapping
    // the inputs gives bit-identical results even before convergence
    let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
    let ab = if a == b {
        entropic_self_ot(&cost_matrix(a, a, scale), a.len(), epsilon, max_iters)?
    } else {
        entropic_ot(&cost_matrix(a, b, scale), a.len(), b.len(), epsilon, max_iters)?
    };
    let aa = entropic_self_ot(&cost_matrix(a, a, scale), a.len(), epsilon, max_iters)?;
    let bb = entropic_self_ot(&cost_matrix(b, b, scale), b.len(), epsilon, max_iters)?;
    let value = ab.value - 0.5 * (aa.value + bb.value);
    let iterations = ab.iterations.max(aa.iterations).max(bb.iterations);
    let violation = ab.violation.max(aa.violation).max(bb.violation);
    Ok((value, iterations, violation))
}

/// `S_eps(A, B) = OT_eps(A, B) - OT_eps(A, A)/2 - OT_eps(B, B)/2`.
pub fn sinkhorn_divergence(
    a: &EmpiricalSample,
    b: &EmpiricalSample,
    epsilon: f64,
    max_iters: usize,
) -> Result<TransportEstimate> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    let (value, iterations, violation) =
        sinkhorn_rows(&rows_of(&a.values), &rows_of(&b.values), 1.0, epsilon, max_iters)?;
    Ok(TransportEstimate::point(
        value,
        Estimator::Sinkhorn { epsilon, iterations, violation, converged: violation <= SINKHORN_TOLERANCE },
        Normalization::Raw,
        a.len().min(b.len()),
    ))
}
