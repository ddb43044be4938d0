use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{Error, Result};

/// Exponent vector `(I_1, ..., I_n)` of the monomial `x^I`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `e_i` scaled by `power`.
    pub fn unit(n: usize, i: usize, power: u32) -> Self {
        let mut v = vec![0; n];
        v[i] = power;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `I!` = product of factorials of the exponents.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }

    /// Multinomial coefficient `|I|! / I!`.
    pub fn multinomial(&self) -> f64 {
        factorial(self.degree()) / self.factorial()
    }

    /// `x^I`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product()
    }

    pub fn all_even(&self) -> bool {
        self.0.iter().all(|k| k % 2 == 0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (2..=k).map(f64::from).product()
}

/// `(k-1)!!` for even `k`, i.e. `E[w^k]` for standard normal `w`.
pub(crate) fn gaussian_even_moment(k: u32) -> f64 {
    debug_assert!(k.is_multiple_of(2));
    let mut v = 1.0;
    let mut j = 1;
    while j < k {
        v *= f64::from(j);
        j += 2;
    }
    v
}

/// `C(n + m - 1, m)`, saturating.
pub fn level_size(n: usize, m: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=m as u128 {
        c = c * (n as u128 + i - 1) / i;
        if c > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    c as usize
}

/// All `I` with `|I| = m` in `n` variables, in descending lexicographic order
/// (`(m,0,..,0)` first, `(0,..,0,m)` last).
pub fn multi_indices(n: usize, m: usize) -> Result<Vec<MultiIndex>> {
    multi_indices_capped(n, m, Caps::from_env().enumeration)
}

pub fn multi_indices_capped(n: usize, m: usize, cap: usize) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let size = level_size(n, m);
    if size > cap {
        return Err(Error::DimensionCap { dim: size, cap });
    }
    let mut out = Vec::with_capacity(size);
    let mut current = vec![0u32; n];
    fill(&mut current, 0, m as u32, &mut out);
    Ok(out)
}

fn fill(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos == current.len() - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        fill(current, pos + 1, remaining - k, out);
    }
}

/// Ordered basis of `H = sum_{m <= d} Sym((R^n)^{(x) m})`: levels `0..=d`
/// concatenated.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    pub n: usize,
    pub d: usize,
    pub index_list: Vec<MultiIndex>,
    /// `offsets[m]..offsets[m + 1]` is level `m` in `index_list`.
    offsets: Vec<usize>,
}

impl FeatureBasis {
    pub fn new(n: usize, d: usize) -> Result<Arc<Self>> {
        Self::with_cap(n, d, Caps::from_env().enumeration)
    }

    pub fn with_cap(n: usize, d: usize, cap: usize) -> Result<Arc<Self>> {
        let total = (0..=d).fold(0usize, |acc, m| acc.saturating_add(level_size(n, m)));
        if total > cap {
            return Err(Error::DimensionCap { dim: total, cap });
        }
        let mut index_list = Vec::with_capacity(total);
        let mut offsets = vec![0];
        for m in 0..=d {
            index_list.extend(multi_indices_capped(n, m, cap)?);
            offsets.push(index_list.len());
        }
        Ok(Arc::new(Self { n, d, index_list, offsets }))
    }

    pub fn dim(&self) -> usize {
        self.index_list.len()
    }

    pub fn level_range(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[m]..self.offsets[m + 1]
    }

    pub fn level_of(&self, coord: usize) -> usize {
        self.offsets.partition_point(|&o| o <= coord) - 1
    }

    pub fn same_shape(&self, other: &FeatureBasis) -> bool {
        self.n == other.n && self.d == other.d
    }
}
