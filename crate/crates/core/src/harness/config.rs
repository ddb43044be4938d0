use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hermite::{parse_coefficients, Activation, PolynomialCoefficients, DEFAULT_QUAD_ORDER};
use crate::process::rng::{derive_seed, streams};
use crate::transport::{
    BoundConstants, TransportMethod, TransportOptions, DEFAULT_BOOTSTRAP, DEFAULT_EPSILON_FACTOR,
    DEFAULT_SINKHORN_ITERS,
};

/// Largest Hermite degree the coefficient table accepts.
pub const MAX_TABLE_DEGREE: usize = 200;

/// Role indices under the experiment stream, used when a seed key is absent.
mod roles {
    pub const POINTS: u64 = 0;
    pub const NETWORK: u64 = 1;
    pub const GP: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const AUDIT: u64 = 4;
}

const KEYS: &[&str] = &[
    "activation",
    "poly",
    "n",
    "points",
    "reps",
    "k",
    "k_grid",
    "seed",
    "point_seed",
    "network_seed",
    "gp_seed",
    "bootstrap_seed",
    "audit_seed",
    "method",
    "bootstrap",
    "epsilon_factor",
    "max_iters",
    "c",
    "c_prime",
    "dmax",
    "quad_order",
    "empirical",
    "out",
];

/// Fully resolved experiment settings. Every seed is stored explicitly; the
/// per-role seeds default to values derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "activation_str")]
    pub activation: Activation,
    /// Monomial coefficients for the `sigma` command.
    pub poly: PolynomialCoefficients,
    pub n: usize,
    /// Sphere points per marginal.
    pub points: usize,
    /// Samples per side (`N`); rate rows also report `2N`.
    pub reps: usize,
    /// Width for the `sample` command.
    pub k: usize,
    pub k_grid: Vec<usize>,
    pub seed: u64,
    pub point_seed: u64,
    pub network_seed: u64,
    pub gp_seed: u64,
    pub bootstrap_seed: u64,
    pub audit_seed: u64,
    pub method: TransportMethod,
    pub bootstrap: usize,
    pub epsilon_factor: f64,
    pub max_iters: usize,
    pub constants: BoundConstants,
    pub dmax: usize,
    pub quad_order: usize,
    /// Sample count for an empirical covariance; 0 means analytic.
    pub empirical: usize,
    pub out: PathBuf,
}

fn activation_str<S: serde::Serializer>(a: &Activation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&a.to_string())
}

/// Reads `key = value` lines. Blank lines and `#` comments are skipped;
/// repeated keys are rejected.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))),
    }
}

/// Comma-separated widths; `a..b` expands to the powers of two from `2^a` to
/// `2^b`.
pub fn parse_k_grid(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| Error::Config(format!("bad k_grid `{s}`")))?;
        let hi: u32 = hi.trim().parse().map_err(|_| Error::Config(format!("bad k_grid `{s}`")))?;
        if hi >= usize::BITS {
            return Err(Error::Config(format!("k_grid exponent {hi} too large")));
        }
        return Ok((lo..=hi).map(|e| 1usize << e).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad k_grid entry `{t}`"))))
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_map(&BTreeMap::new()).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(&parse_config_text(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{bad}`")));
        }
        let activation: Activation = match map.get("activation") {
            Some(v) => v.parse()?,
            None => Activation::polynomial(vec![0.0, 0.0, 1.0])?,
        };
        let poly = PolynomialCoefficients::new(match map.get("poly") {
            Some(v) => parse_coefficients(v)?,
            None => vec![0.0, 0.0, 1.0],
        });
        let seed: u64 = parse(map, "seed", 0)?;
        let role = |key: &str, r: u64| parse(map, key, derive_seed(seed, streams::EXPERIMENT, r));
        let cfg = Self {
            activation,
            poly,
            n: parse(map, "n", 3)?,
            points: parse(map, "points", 5)?,
            reps: parse(map, "reps", 512)?,
            k: parse(map, "k", 16)?,
            k_grid: match map.get("k_grid") {
                Some(v) => parse_k_grid(v)?,
                None => (4..=12).map(|e| 1 << e).collect(),
            },
            seed,
            point_seed: role("point_seed", roles::POINTS)?,
            network_seed: role("network_seed", roles::NETWORK)?,
            gp_seed: role("gp_seed", roles::GP)?,
            bootstrap_seed: role("bootstrap_seed", roles::BOOTSTRAP)?,
            audit_seed: role("audit_seed", roles::AUDIT)?,
            method: parse(map, "method", TransportMethod::Auto)?,
            bootstrap: parse(map, "bootstrap", DEFAULT_BOOTSTRAP)?,
            epsilon_factor: parse(map, "epsilon_factor", DEFAULT_EPSILON_FACTOR)?,
            max_iters: parse(map, "max_iters", DEFAULT_SINKHORN_ITERS)?,
            constants: BoundConstants { c: parse(map, "c", 1.0)?, c_prime: parse(map, "c_prime", 1.0)? },
            dmax: parse(map, "dmax", 40)?,
            quad_order: parse(map, "quad_order", DEFAULT_QUAD_ORDER)?,
            empirical: parse(map, "empirical", 0)?,
            out: PathBuf::from(map.get("out").map_or(".", String::as_str)),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_grid.is_empty() {
            return Err(Error::Config("k_grid is empty".into()));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) || self.k_grid[0] == 0 {
            return Err(Error::Config("k_grid must be positive and strictly increasing".into()));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.points == 0 || self.reps < 2 || self.k == 0 {
            return Err(Error::Config("points, k must be positive and reps at least 2".into()));
        }
        if self.dmax > MAX_TABLE_DEGREE {
            return Err(Error::Config(format!("dmax {} exceeds {MAX_TABLE_DEGREE}", self.dmax)));
        }
        if !(self.epsilon_factor > 0.0) || self.max_iters == 0 {
            return Err(Error::Config("epsilon_factor and max_iters must be positive".into()));
        }
        if !(self.constants.c > 0.0) || !(self.constants.c_prime > 0.0) {
            return Err(Error::Config("constants c and c_prime must be positive".into()));
        }
        Ok(())
    }

    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions {
            method: self.method,
            bootstrap: self.bootstrap,
            seed: self.bootstrap_seed,
            epsilon_factor: self.epsilon_factor,
            max_iters: self.max_iters,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved config, with the
    /// output directory blanked so that moving the output keeps the hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("config serializes"));
        hex::encode(&digest[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let cfg = ExperimentConfig::from_text("# rate run\nactivation = relu\nn = 4\nk_grid = 16, 64 ,256\n").unwrap();
        assert_eq!(cfg.activation, Activation::Relu);
        assert_eq!((cfg.n, cfg.k_grid.clone()), (4, vec![16, 64, 256]));
        assert!(ExperimentConfig::from_text("k_grid =").is_err());
        assert!(ExperimentConfig::from_text("k_grid = 64, 16").is_err());
        assert!(ExperimentConfig::from_text("k_grid = 16, 16").is_err());
        assert!(ExperimentConfig::from_text("colour = red").is_err());
        assert!(ExperimentConfig::from_text("n = 3\nn = 4").is_err());
        assert!(ExperimentConfig::from_text("n 3").is_err());
        assert_eq!(parse_k_grid("4..6").unwrap(), vec![16, 32, 64]);
    }

    #[test]
    fn seeds_are_explicit_and_hash_tracks_content() {
        let a = ExperimentConfig::from_text("seed = 7").unwrap();
        let b = ExperimentConfig::from_text("seed = 7\nout = elsewhere").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.network_seed, a.gp_seed);
        let c = ExperimentConfig::from_text("seed = 8").unwrap();
        assert_ne!(a.hash(), c.hash());
        let pinned = ExperimentConfig::from_text(&format!("seed = 8\nnetwork_seed = {}", a.network_seed)).unwrap();
        assert_eq!(pinned.network_seed, a.network_seed);
        let json: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(json["gp_seed"], a.gp_seed);
        assert_eq!(json["activation"], "poly:0,0,1");
        assert_eq!(json["constants"]["c"], 1.0);
    }
}
