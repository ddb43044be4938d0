use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::ols;

/// Fewest `(k, value)` pairs a slope is fitted from.
pub const MIN_FIT_POINTS: usize = 4;

/// Least-squares line through `(ln k, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_FIT_POINTS} pairs for a slope, got {}",
            pairs.len()
        )));
    }
    if let Some(&(k, v)) = pairs.iter().find(|(k, v)| !(*k > 0.0) || !(*v > 0.0)) {
        return Err(Error::InvalidParameter(format!("log-log fit needs positive pairs, got ({k}, {v})")));
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|(k, v)| (k.ln(), v.ln())).collect();
    if logs.iter().all(|p| p.0 == logs[0].0) {
        return Err(Error::InvalidParameter("log-log fit needs at least two distinct k".into()));
    }
    let (slope, intercept, r_squared, _) = ols(&logs);
    Ok(RateFit { slope, intercept, r_squared, points: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (4..=12).map(|e| 2f64.powi(e)).map(|k| (k, f(k))).collect()
    }

    #[test]
    fn examples() {
        let fit = fit_loglog_slope(&grid(|k| 3.0 / k)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-9);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let fit = fit_loglog_slope(&grid(|k| k.powf(-1.0 / 3.0))).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-9);
        let fit = fit_loglog_slope(&grid(|_| 0.7)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog_slope(&grid(|k| 1.0 / k)[..3]).is_err());
        assert!(fit_loglog_slope(&grid(|k| 1.0 - k.log2() / 8.0)).is_err());
        assert!(fit_loglog_slope(&[(4.0, 1.0); 5]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_power_laws(a in -2.0f64..2.0, c in 0.01f64..100.0) {
            let fit = fit_loglog_slope(&grid(|k| c * k.powf(a))).unwrap();
            prop_assert!((fit.slope - a).abs() < 1e-9);
        }
    }
}
