use serde::{Deserialize, Serialize};

use super::rng::{normal_vector, stream_rng, streams};
use crate::error::{Error, Result};

pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Points on the unit sphere `S^{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    n: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.first().map(Vec::len).ok_or_else(|| Error::Shape("empty point set".into()))?;
        if n == 0 {
            return Err(Error::Shape("points must have dimension at least 1".into()));
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::Shape(format!("point {index} has dimension {}, expected {n}", p.len())));
            }
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
                return Err(Error::NotUnit { index, norm });
            }
        }
        Ok(Self { n, points })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    /// Gram matrix entries `x_j . x_l`.
    pub fn dot(&self, j: usize, l: usize) -> f64 {
        self.points[j].iter().zip(&self.points[l]).map(|(a, b)| a * b).sum()
    }
}

/// `m` i.i.d. uniform points on `S^{n-1}` (normalized Gaussians).
pub fn sphere_sample(n: usize, m: usize, seed: u64) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("sphere sampling needs n >= 2, got {n}")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("point count must be positive".into()));
    }
    let points = (0..m)
        .map(|j| {
            let mut rng = stream_rng(seed, streams::SPHERE, j as u64);
            loop {
                let v = normal_vector(&mut rng, n);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-150 {
                    return v.into_iter().map(|x| x / norm).collect();
                }
            }
        })
        .collect();
    PointSet::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_examples() {
        let p = sphere_sample(4, 1, 9).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.dot(0, 0) - 1.0).abs() < 1e-14);
        assert_eq!(sphere_sample(3, 2, 5).unwrap(), sphere_sample(3, 2, 5).unwrap());
        assert!(sphere_sample(1, 2, 5).is_err());
    }

    #[test]
    fn sphere_is_centered() {
        let p = sphere_sample(3, 100_000, 1).unwrap();
        let mut mean = [0.0; 3];
        for x in p.points() {
            for i in 0..3 {
                mean[i] += x[i] / p.len() as f64;
            }
        }
        assert!(mean.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.02);
    }

    #[test]
    fn rejects_non_unit() {
        assert!(matches!(PointSet::new(vec![vec![1.0, 0.1]]), Err(Error::NotUnit { index: 0, .. })));
        assert!(PointSet::new(vec![vec![1.0, 0.0], vec![1.0]]).is_err());
    }
}
