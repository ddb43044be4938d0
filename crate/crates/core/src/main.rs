use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gp_limit_lab::harness::commands::{
    command_audit, command_coeffs, command_distance, command_rate, command_sample, command_sigma, Outputs,
};
use gp_limit_lab::harness::{parse_config_text, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gp-limit-lab", version, about = "Wide random networks versus their Gaussian-process limit")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hermite coefficient table of an activation.
    Coeffs {
        #[arg(long)]
        activation: Option<String>,
        #[arg(long)]
        dmax: Option<usize>,
        #[arg(long)]
        quad_order: Option<usize>,
    },
    /// Spectrum of the feature covariance of a polynomial.
    Sigma {
        /// Monomial coefficients `a0,a1,...`.
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Estimate from this many Gaussian samples instead of exactly.
        #[arg(long)]
        empirical: Option<usize>,
    },
    /// Network and Gaussian-limit marginals at random sphere points.
    Sample {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Squared W2 estimate between two sample files.
    Distance {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        method: Option<String>,
    },
    /// Transport estimates across a grid of widths.
    Rate {
        #[command(flatten)]
        process: ProcessArgs,
        /// Comma list, or `a..b` for powers of two.
        #[arg(long)]
        k_grid: Option<String>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Covariance lemma checks; exits nonzero if an asserted row fails.
    Audit,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
}

fn put<T: ToString>(map: &mut BTreeMap<String, String>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_string(), v.to_string());
    }
}

impl ProcessArgs {
    fn apply(&self, map: &mut BTreeMap<String, String>) {
        put(map, "activation", self.activation.as_ref());
        put(map, "n", self.n);
        put(map, "points", self.points);
        put(map, "reps", self.reps);
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut map = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    put(&mut map, "seed", cli.seed);
    put(&mut map, "out", cli.out.as_ref().map(|p| p.display()));
    match &cli.command {
        Command::Coeffs { activation, dmax, quad_order } => {
            put(&mut map, "activation", activation.as_ref());
            put(&mut map, "dmax", *dmax);
            put(&mut map, "quad_order", *quad_order);
        }
        Command::Sigma { poly, n, empirical } => {
            put(&mut map, "poly", poly.as_ref());
            put(&mut map, "n", *n);
            put(&mut map, "empirical", *empirical);
        }
        Command::Sample { process, k } => {
            process.apply(&mut map);
            put(&mut map, "k", *k);
        }
        Command::Distance { method, .. } => put(&mut map, "method", method.as_ref()),
        Command::Rate { process, k_grid, method, bootstrap } => {
            process.apply(&mut map);
            put(&mut map, "k_grid", k_grid.as_ref());
            put(&mut map, "method", method.as_ref());
            put(&mut map, "bootstrap", *bootstrap);
        }
        Command::Audit => {}
    }
    Ok(ExperimentConfig::from_map(&map)?)
}

fn run(cli: &Cli) -> anyhow::Result<Outputs> {
    let cfg = resolve(cli)?;
    let outputs = match &cli.command {
        Command::Coeffs { .. } => command_coeffs(&cfg)?,
        Command::Sigma { .. } => command_sigma(&cfg)?,
        Command::Sample { .. } => command_sample(&cfg)?,
        Command::Distance { a, b, .. } => command_distance(&cfg, a, b)?,
        Command::Rate { .. } => command_rate(&cfg)?,
        Command::Audit => command_audit(&cfg)?,
    };
    Ok(outputs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outputs) => {
            for f in &outputs.files {
                println!("{}", f.display());
            }
            if outputs.failed {
                eprintln!("one or more asserted checks failed");
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
