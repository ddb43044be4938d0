//! File-writing front ends for the CLI subcommands. Every CSV row ends with
//! the config hash and the bound constants.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::json;

use super::audit::{run_bound_audit, QUADRATIC_OPNORM_CEILING};
use super::coeffs::run_coefficient_table;
use super::config::ExperimentConfig;
use super::rate::run_rate_experiment;
use crate::error::{Error, Result};
use crate::process::{kernel_expansion, nngp_kernel, sample_gp_marginal, sample_marginal, sphere_sample};
use crate::tensor::{covariance_analytic, covariance_empirical, sigma_upper_bound_rhs, spectrum};
use crate::transport::{estimate_rows, estimate_w2, rows_of, EmpiricalSample, Normalization, PSD_TOLERANCE};

/// Files a command wrote, and whether it should exit nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    pub failed: bool,
}

fn io<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip form, in scientific notation for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
    tail: Vec<String>,
}

impl Table {
    fn create(cfg: &ExperimentConfig, name: &str, header: &[&str]) -> Result<Self> {
        fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
        let path = cfg.out.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(io(&path))?;
        let mut full: Vec<&str> = header.to_vec();
        full.extend(["config_hash", "c", "c_prime"]);
        writer.write_record(&full).map_err(io(&path))?;
        let tail = vec![cfg.hash(), num(cfg.constants.c), num(cfg.constants.c_prime)];
        Ok(Self { path, writer, tail })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<()> {
        let path = &self.path;
        self.writer.write_record(fields.iter().chain(&self.tail)).map_err(io(path))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(io(&self.path))?;
        Ok(self.path)
    }
}

fn write_json(cfg: &ExperimentConfig, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    let path = cfg.out.join(name);
    let text = serde_json::to_string_pretty(value).map_err(io(&path))?;
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(path)
}

/// `config.json`: the resolved config with its hash.
pub fn write_config(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let mut value = serde_json::to_value(cfg).map_err(io(Path::new("config.json")))?;
    value["config_hash"] = json!(cfg.hash());
    write_json(cfg, "config.json", &value)
}

pub fn command_coeffs(cfg: &ExperimentConfig) -> Result<Outputs> {
    let rows = run_coefficient_table(&cfg.activation, cfg.dmax, cfg.quad_order)?;
    let mut t = Table::create(cfg, "coeffs.csv", &["m", "quadrature", "closed_form", "provenance", "ratio", "remainder"])?;
    for r in rows {
        let provenance = r.provenance.map(|p| format!("{p:?}")).unwrap_or_default();
        t.row(vec![
            r.m.to_string(),
            num(r.quadrature),
            opt(r.closed_form),
            provenance,
            opt(r.ratio),
            num(r.remainder),
        ])?;
    }
    Ok(Outputs { files: vec![write_config(cfg)?, t.finish()?], failed: false })
}

pub fn command_sigma(cfg: &ExperimentConfig) -> Result<Outputs> {
    let cov = if cfg.empirical > 0 {
        covariance_empirical(&cfg.poly, cfg.n, cfg.empirical, cfg.seed)?
    } else {
        covariance_analytic(&cfg.poly, cfg.n)?
    };
    let spec = spectrum(&cov)?;
    let total: f64 = spec.values.iter().map(|v| v.max(0.0)).sum();
    let mut t = Table::create(cfg, "sigma_spectrum.csv", &["rank", "eigenvalue", "cumulative_mass"])?;
    let mut cumulative = 0.0;
    for (i, v) in spec.values.iter().enumerate() {
        cumulative += v.max(0.0);
        let mass = if total > 0.0 { cumulative / total } else { 0.0 };
        t.row(vec![(i + 1).to_string(), num(*v), num(mass)])?;
    }
    let spectrum_path = t.finish()?;

    let d = cfg.poly.degree();
    let upper = sigma_upper_bound_rhs(d, cfg.n, cfg.poly.max_abs());
    let floor = -PSD_TOLERANCE * spec.max().max(1.0);
    let mut checks = vec![
        ("sigma_upper", spec.max(), upper, spec.max() <= upper),
        ("psd_min_eigenvalue", spec.min(), floor, spec.min() >= floor),
    ];
    if cfg.poly.a == [0.0, 0.0, 1.0] {
        checks.push(("quadratic_opnorm", spec.max(), QUADRATIC_OPNORM_CEILING, spec.max() <= QUADRATIC_OPNORM_CEILING));
    }
    let mut a = Table::create(cfg, "sigma_audit.csv", &["bound_name", "lhs", "rhs", "pass"])?;
    let mut failed = false;
    for (name, lhs, rhs, pass) in checks {
        failed |= !pass;
        a.row(vec![name.to_string(), num(lhs), num(rhs), pass.to_string()])?;
    }
    Ok(Outputs { files: vec![write_config(cfg)?, spectrum_path, a.finish()?], failed })
}

fn write_long(cfg: &ExperimentConfig, name: &str, values: &DMatrix<f64>) -> Result<PathBuf> {
    let mut t = Table::create(cfg, name, &["rep_id", "point_id", "value"])?;
    for r in 0..values.nrows() {
        for j in 0..values.ncols() {
            t.row(vec![r.to_string(), j.to_string(), num(values[(r, j)])])?;
        }
    }
    t.finish()
}

/// Network marginals in `marginals.csv`, Gaussian-limit marginals at the same
/// points in `gp_marginals.csv`, plus the points and kernel.
pub fn command_sample(cfg: &ExperimentConfig) -> Result<Outputs> {
    let points = sphere_sample(cfg.n, cfg.points, cfg.point_seed)?;
    let network = sample_marginal(cfg.k, &cfg.activation, &points, cfg.reps, cfg.network_seed)?;
    let kernel = nngp_kernel(&kernel_expansion(&cfg.activation)?, &points)?;
    let gp = sample_gp_marginal(&kernel, &points, cfg.reps, cfg.gp_seed, 0.0)?;

    let coords: Vec<String> = (0..cfg.n).map(|i| format!("x{i}")).collect();
    let mut header = vec!["point_id"];
    header.extend(coords.iter().map(String::as_str));
    let mut p = Table::create(cfg, "points.csv", &header)?;
    for (j, x) in points.points().iter().enumerate() {
        p.row(std::iter::once(j.to_string()).chain(x.iter().map(|v| num(*v))).collect())?;
    }
    let mut k = Table::create(cfg, "kernel.csv", &["row", "col", "value", "jitter", "degree", "remainder"])?;
    for r in 0..kernel.matrix.nrows() {
        for c in 0..kernel.matrix.ncols() {
            k.row(vec![
                r.to_string(),
                c.to_string(),
                num(kernel.matrix[(r, c)]),
                num(kernel.jitter),
                kernel.degree.to_string(),
                num(kernel.remainder),
            ])?;
        }
    }
    let files = vec![
        write_config(cfg)?,
        write_long(cfg, "marginals.csv", &network.values)?,
        write_long(cfg, "gp_marginals.csv", &gp.values)?,
        p.finish()?,
        k.finish()?,
    ];
    Ok(Outputs { files, failed: false })
}

/// Reads a sample file. Long files (`rep_id, point_id, value` columns) are
/// pivoted to one row per rep and flagged as marginals; otherwise every
/// column except the provenance tail is a coordinate.
pub fn read_sample(path: &Path) -> Result<(EmpiricalSample, bool)> {
    let mut reader = csv::Reader::from_path(path).map_err(io(path))?;
    let header: Vec<String> = reader.headers().map_err(io(path))?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>().map_err(io(path))?;
    let field = |rec: &csv::StringRecord, i: usize| -> Result<f64> {
        rec.get(i)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Io(format!("{}: bad number in column {}", path.display(), header[i])))
    };
    if let (Some(ri), Some(pi), Some(vi)) = (col("rep_id"), col("point_id"), col("value")) {
        let mut cells = Vec::with_capacity(records.len());
        for rec in &records {
            cells.push((field(rec, ri)? as usize, field(rec, pi)? as usize, field(rec, vi)?));
        }
        let reps = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let m = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
        if cells.len() != reps * m {
            return Err(Error::Shape(format!("{}: expected {reps}x{m} cells, found {}", path.display(), cells.len())));
        }
        let mut values = DMatrix::from_element(reps, m, f64::NAN);
        cells.iter().for_each(|&(r, j, v)| values[(r, j)] = v);
        let label = path.display().to_string();
        return Ok((EmpiricalSample::new(values, label)?, true));
    }
    let coords: Vec<usize> =
        (0..header.len()).filter(|&i| !matches!(header[i].as_str(), "config_hash" | "c" | "c_prime")).collect();
    let rows = records
        .iter()
        .map(|rec| coords.iter().map(|&i| field(rec, i)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((EmpiricalSample::from_rows(&rows, path.display().to_string())?, false))
}

/// `W_2^2` between two sample files into `estimate.json`. Marginal files use
/// the per-point cost.
pub fn command_distance(cfg: &ExperimentConfig, a: &Path, b: &Path) -> Result<Outputs> {
    let (sa, la) = read_sample(a)?;
    let (sb, lb) = read_sample(b)?;
    let opts = cfg.transport_options();
    let estimate = if la && lb {
        let scale = 1.0 / sa.dim() as f64;
        if sa.dim() != sb.dim() {
            return Err(Error::Shape("marginal files have different point counts".into()));
        }
        let normalization = Normalization::PerPoint { m: sa.dim() };
        estimate_rows(&rows_of(&sa.values), &rows_of(&sb.values), scale, normalization, &opts)?
    } else {
        estimate_w2(&sa, &sb, &opts)?
    };
    let value = json!({
        "a": a.display().to_string(),
        "b": b.display().to_string(),
        "estimate": estimate,
        "constants": cfg.constants,
        "config_hash": cfg.hash(),
    });
    Ok(Outputs { files: vec![write_config(cfg)?, write_json(cfg, "estimate.json", &value)?], failed: false })
}

pub fn command_rate(cfg: &ExperimentConfig) -> Result<Outputs> {
    let report = run_rate_experiment(cfg)?;
    let mut t = Table::create(
        cfg,
        "rate.csv",
        &[
            "k",
            "samples",
            "value",
            "ci_low",
            "ci_high",
            "squared",
            "estimator",
            "normalization",
            "bound_kind",
            "bound_value",
            "log_cd",
            "reference_rate",
            "error",
        ],
    )?;
    for row in &report.rows {
        let bound_kind = row.bound.as_ref().map(|b| b.kind.label().to_string()).unwrap_or_default();
        let bound_value = opt(row.bound.as_ref().map(|b| b.value()));
        let log_cd = opt(row.bound.as_ref().map(|b| b.log_cd));
        let reference = opt(row.reference.as_ref().map(|b| b.value()));
        let error = row.error.clone().unwrap_or_default();
        let samples = [(cfg.reps, &row.estimate), (2 * cfg.reps, &row.estimate_2n)];
        for (n, est) in samples {
            let fields = match est {
                Some(e) => vec![
                    num(e.value),
                    num(e.ci_low),
                    num(e.ci_high),
                    e.squared.to_string(),
                    serde_json::to_string(&e.estimator).unwrap_or_default(),
                    serde_json::to_string(&e.normalization).unwrap_or_default(),
                ],
                None => vec![String::new(); 6],
            };
            let mut rec = vec![row.k.to_string(), n.to_string()];
            rec.extend(fields);
            rec.extend([bound_kind.clone(), bound_value.clone(), log_cd.clone(), reference.clone(), error.clone()]);
            t.row(rec)?;
        }
    }
    let rate_path = t.finish()?;
    let mut f = Table::create(cfg, "rate_fit.csv", &["samples", "slope", "intercept", "r_squared", "points", "error"])?;
    for (n, fit) in [(cfg.reps, &report.fit), (2 * cfg.reps, &report.fit_2n)] {
        f.row(match fit {
            Some(fit) => vec![n.to_string(), num(fit.slope), num(fit.intercept), num(fit.r_squared), fit.points.to_string(), String::new()],
            None => {
                let err = report.fit_error.clone().unwrap_or_else(|| "fit failed".into());
                vec![n.to_string(), String::new(), String::new(), String::new(), String::new(), err]
            }
        })?;
    }
    Ok(Outputs { files: vec![write_config(cfg)?, rate_path, f.finish()?], failed: false })
}

/// Writes `audit.csv`; `failed` is set iff an asserted row fails.
pub fn command_audit(cfg: &ExperimentConfig) -> Result<Outputs> {
    let report = run_bound_audit(cfg)?;
    let mut t = Table::create(cfg, "audit.csv", &["lemma", "params", "lhs", "rhs", "relation", "pass", "asserted", "notes"])?;
    for r in &report.rows {
        t.row(vec![
            r.lemma.to_string(),
            r.params.clone(),
            num(r.lhs),
            num(r.rhs),
            serde_json::to_value(r.relation).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
            r.pass.to_string(),
            r.asserted.to_string(),
            r.notes.clone(),
        ])?;
    }
    Ok(Outputs { files: vec![write_config(cfg)?, t.finish()?], failed: !report.passed() })
}
