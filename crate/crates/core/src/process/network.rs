use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::points::PointSet;
use super::rng::{normal_vector, random_sign, stream_rng, streams, StreamRng};
use crate::error::{Error, Result};
use crate::hermite::{Activation, PolynomialCoefficients};
use crate::tensor::{FeatureMap, FeatureVector};

/// Weights `w_1..w_k` (rows) and signs `s_1..s_k` of one random network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDraw {
    pub weights: DMatrix<f64>,
    pub signs: Vec<f64>,
    pub seed: u64,
}

impl NetworkDraw {
    /// Draw number `index` for `seed`; all weights come first, then all signs.
    pub fn sample(n: usize, k: usize, seed: u64, index: u64) -> Self {
        let mut rng = stream_rng(seed, streams::NETWORK, index);
        Self::from_rng(&mut rng, n, k, seed)
    }

    fn from_rng(rng: &mut StreamRng, n: usize, k: usize, seed: u64) -> Self {
        let mut weights = DMatrix::zeros(k, n);
        for i in 0..k {
            for (j, v) in normal_vector(rng, n).into_iter().enumerate() {
                weights[(i, j)] = v;
            }
        }
        let signs = (0..k).map(|_| random_sign(rng)).collect();
        Self { weights, signs, seed }
    }

    pub fn k(&self) -> usize {
        self.signs.len()
    }

    pub fn n(&self) -> usize {
        self.weights.ncols()
    }
}

/// `(1/sqrt k) sum_i s_i sigma(w_i . x_j)` for each point.
pub fn evaluate_network(draw: &NetworkDraw, activation: &Activation, points: &PointSet) -> Result<Vec<f64>> {
    if draw.n() != points.n() {
        return Err(Error::Shape(format!("network input dimension {} vs points {}", draw.n(), points.n())));
    }
    let inv_sqrt_k = 1.0 / (draw.k() as f64).sqrt();
    Ok(points
        .points()
        .iter()
        .map(|x| {
            let xv = DVector::from_column_slice(x);
            let pre = &draw.weights * xv;
            let sum: f64 = pre.iter().zip(&draw.signs).map(|(z, s)| s * activation.eval(*z)).sum();
            sum * inv_sqrt_k
        })
        .collect())
}

/// `X_k = (1/sqrt k) sum_i s_i P(w_i)` for a given draw.
pub fn feature_sum_of_draw(draw: &NetworkDraw, map: &FeatureMap) -> FeatureVector {
    let dim = map.dim();
    let mut acc = DVector::zeros(dim);
    let mut buf = vec![0.0; dim];
    for (i, s) in draw.signs.iter().enumerate() {
        let w: Vec<f64> = draw.weights.row(i).iter().copied().collect();
        map.embed_into(&w, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += s * b;
        }
    }
    acc /= (draw.k() as f64).sqrt();
    FeatureVector { basis: map.basis().clone(), coords: acc }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    /// `"network"` or `"gp"`.
    pub source: String,
    pub k: Option<usize>,
    pub activation: String,
    pub seed: u64,
    pub jitter: Option<f64>,
}

/// `reps` independent draws of the process at a fixed point set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMarginalSample {
    /// `reps x m`.
    pub values: DMatrix<f64>,
    pub points: PointSet,
    pub metadata: SampleMetadata,
}

impl ProcessMarginalSample {
    pub fn reps(&self) -> usize {
        self.values.nrows()
    }
}

/// `reps` networks of width `k`, network `r` seeded by `(seed, r)`.
pub fn sample_marginal(
    k: usize,
    activation: &Activation,
    points: &PointSet,
    reps: usize,
    seed: u64,
) -> Result<ProcessMarginalSample> {
    if reps == 0 || k == 0 {
        return Err(Error::InvalidParameter("reps and k must be positive".into()));
    }
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| evaluate_network(&NetworkDraw::sample(points.n(), k, seed, r as u64), activation, points))
        .collect::<Result<_>>()?;
    let values = DMatrix::from_fn(reps, points.len(), |r, j| rows[r][j]);
    Ok(ProcessMarginalSample {
        values,
        points: points.clone(),
        metadata: SampleMetadata {
            source: "network".into(),
            k: Some(k),
            activation: activation.to_string(),
            seed,
            jitter: None,
        },
    })
}

/// Mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, stderr: (var / n).sqrt(), samples: values.len() }
    }
}

/// `(1/m) sum_j E[(P_k f(x_j) - P_k g(x_j))^2]` with both networks sharing
/// weights and signs.
pub fn coupled_l2_discrepancy(
    f: &Activation,
    g: &Activation,
    k: usize,
    points: &PointSet,
    reps: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if reps == 0 || k == 0 {
        return Err(Error::InvalidParameter("reps and k must be positive".into()));
    }
    let per_rep: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let draw = NetworkDraw::sample(points.n(), k, seed, r as u64);
            let a = evaluate_network(&draw, f, points)?;
            let b = evaluate_network(&draw, g, points)?;
            Ok(a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(MonteCarloEstimate::from_values(&per_rep))
}

/// `reps` draws of `X_k` in the feature space of `poly`, one row each.
pub fn feature_sum_sample(
    poly: &PolynomialCoefficients,
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<(FeatureMap, DMatrix<f64>)> {
    if reps == 0 || k == 0 {
        return Err(Error::InvalidParameter("reps and k must be positive".into()));
    }
    let map = FeatureMap::new(poly, n)?;
    let cap = crate::caps::Caps::from_env().dense;
    if map.dim() > cap {
        return Err(Error::DimensionCap { dim: map.dim(), cap });
    }
    let rows: Vec<DVector<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, streams::FEATURE_SUM, r as u64);
            let draw = NetworkDraw::from_rng(&mut rng, n, k, seed);
            feature_sum_of_draw(&draw, &map).coords
        })
        .collect();
    let values = DMatrix::from_fn(reps, map.dim(), |r, c| rows[r][c]);
    Ok((map, values))
}
