//! Size caps that keep enumeration and dense linear algebra at desk scale.

/// Environment variable overriding the dense-matrix dimension cap.
pub const MAX_DIM_ENV: &str = "GPLL_MAX_DIM";

pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;
pub const DEFAULT_DENSE_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest multi-index list or polynomial term count we will enumerate.
    pub enumeration: usize,
    /// Largest dimension of a dense matrix (covariance, kernel).
    pub dense: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self { enumeration: DEFAULT_ENUMERATION_CAP, dense: DEFAULT_DENSE_CAP }
    }
}

impl Caps {
    /// Defaults, with the dense cap taken from `GPLL_MAX_DIM` when set.
    pub fn from_env() -> Self {
        let mut caps = Self::default();
        if let Some(dense) = std::env::var(MAX_DIM_ENV).ok().and_then(|v| v.trim().parse().ok()) {
            caps.dense = dense;
            caps.enumeration = caps.enumeration.max(dense);
        }
        caps
    }
}
