//! Exact equal-weight transport between point clouds of the same size.

use rayon::prelude::*;

use super::estimate::{rows_of, sq_dist, EmpiricalSample, Estimator, Normalization, TransportEstimate};
use crate::error::{Error, Result};

/// Largest instance handed to the assignment solver.
pub const ASSIGNMENT_CAP: usize = 2048;

/// Minimum-cost perfect matching on a dense square cost matrix (row-major).
/// Returns `assignment[i]` = column matched to row `i`.
///
/// Shortest augmenting paths with row/column potentials, one row at a time;
/// `O(N^3)` in the worst case.
pub fn solve_assignment(cost: &[f64], size: usize) -> Vec<usize> {
    assert_eq!(cost.len(), size * size);
    let n = size;
    // 1-based with a virtual column 0, as in the classical formulation
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of[j] - 1] = j - 1;
    }
    assignment
}

/// Squared-Euclidean cost matrix scaled by `scale`.
pub(crate) fn cost_matrix(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> Vec<f64> {
    let cols = b.len();
    let mut cost = vec![0.0; a.len() * cols];
    cost.par_chunks_mut(cols).zip(a.par_iter()).for_each(|(row, x)| {
        for (c, y) in row.iter_mut().zip(b) {
            *c = sq_dist(x, y) * scale;
        }
    });
    cost
}

/// Optimal matching cost divided by `N`, with per-point cost `scale * |x - y|^2`.
pub(crate) fn matching_cost(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> f64 {
    let n = a.len();
    let cost = cost_matrix(a, b, scale);
    let assignment = solve_assignment(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    total / n as f64
}

pub(crate) fn check_assignment_inputs(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!("assignment needs equal sizes, got {} and {}", a.len(), b.len())));
    }
    if a.len() > ASSIGNMENT_CAP {
        return Err(Error::AssignmentCap { size: a.len(), cap: ASSIGNMENT_CAP });
    }
    Ok(())
}

/// Exact empirical `W_2^2` between two equal-size clouds.
pub fn w2_exact(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<TransportEstimate> {
    check_assignment_inputs(a, b)?;
    let value = matching_cost(&rows_of(&a.values), &rows_of(&b.values), 1.0);
    Ok(TransportEstimate::point(value, Estimator::Assignment, Normalization::Raw, a.len()))
}

/// Exact `W_2^2` between two equal-size samples on the line.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<TransportEstimate> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("w2_1d needs equal nonzero lengths, got {} and {}", a.len(), b.len())));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let value = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    Ok(TransportEstimate::point(value, Estimator::Sorted1d, Normalization::Raw, a.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::rng::{normal_vector, stream_rng};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * n + j] + rec(cost, n, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, n, 0, &mut vec![false; n])
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..7, entries in prop::collection::vec(0.0f64..10.0, 36)) {
            let cost = &entries[..n * n];
            let a = solve_assignment(cost, n);
            let mut seen = a.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            prop_assert!((got - brute_force(cost, n)).abs() < 1e-9);
        }
    }

    fn cloud(seed: u64, n: usize, m: usize, scale: f64) -> EmpiricalSample {
        let mut rng = stream_rng(seed, 0, 0);
        let v = normal_vector(&mut rng, n * m);
        EmpiricalSample::new(DMatrix::from_fn(n, m, |i, j| scale * v[i * m + j]), "").unwrap()
    }

    #[test]
    fn examples() {
        let a = cloud(1, 50, 3, 1.0);
        assert_eq!(w2_exact(&a, &a).unwrap().value, 0.0);
        let p = EmpiricalSample::from_rows(&[vec![1.0, 2.0]], "").unwrap();
        let q = EmpiricalSample::from_rows(&[vec![0.0, 0.0]], "").unwrap();
        assert_eq!(w2_exact(&p, &q).unwrap().value, 5.0);
        assert_eq!(w2_1d(&[0.0], &[2.0]).unwrap().value, 4.0);

        let a = cloud(2, 300, 1, 1.0);
        let b = cloud(3, 300, 1, 2.0);
        let exact = w2_exact(&a, &b).unwrap().value;
        let sorted = w2_1d(a.values.as_slice(), b.values.as_slice()).unwrap().value;
        assert!((exact - sorted).abs() <= 1e-12 * sorted.max(1.0));
        let ba = w2_exact(&b, &a).unwrap().value;
        assert!((exact - ba).abs() <= 1e-9 * exact);
    }

    #[test]
    fn one_dimensional_gaussians() {
        let a = cloud(4, 100_000, 1, 1.0);
        let b = cloud(5, 100_000, 1, 2.0);
        let v = w2_1d(a.values.as_slice(), b.values.as_slice()).unwrap().value;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn caps_and_shapes() {
        let a = cloud(1, 3, 2, 1.0);
        let b = cloud(1, 4, 2, 1.0);
        assert!(w2_exact(&a, &b).is_err());
        let big = cloud(1, ASSIGNMENT_CAP + 1, 1, 1.0);
        assert!(matches!(w2_exact(&big, &big), Err(Error::AssignmentCap { .. })));
        assert!(w2_1d(&[1.0], &[1.0, 2.0]).is_err());
    }
}
