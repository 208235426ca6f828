use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chaoslab_core::experiments::{self, ExperimentConfig, ExperimentKind};
use chaoslab_core::Error;
use clap::Parser;

const EXIT_CONFIG: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

/// Run a chaoslab experiment and write `results.csv`,
/// `config.resolved.json` and `diagnostics.json` to the output directory.
#[derive(Debug, Parser)]
#[command(name = "chaoslab", version)]
struct Cli {
    /// lossgrid, marginal, boundary, phase, descent, diagnose or selftest.
    experiment: String,
    /// JSON document overlaid on the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dot-path override, e.g. `--set solver.tol=1e-6`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory; defaults to the config's `out`, then `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    Config(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config(m)) => Failure::Config(m.clone()),
            _ => Failure::Other(e),
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let kind: ExperimentKind = cli
        .experiment
        .parse()
        .map_err(|e: Error| Failure::Config(e.to_string()))?;
    let overlay = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => serde_json::json!({}),
    };
    let mut sets = cli.set.clone();
    if let Some(seed) = cli.seed {
        sets.push(format!("master_seed={seed}"));
    }
    if let Some(out) = &cli.out {
        sets.push(format!("out={}", serde_json::Value::String(out.display().to_string())));
    }
    ExperimentConfig::from_json(kind, &overlay)
        .and_then(|c| c.with_overrides(&sets))
        .map_err(|e| match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Config(other.to_string()),
        })
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let config = resolve(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let outcome = experiments::run(&config).map_err(|e| match e {
        Error::Config(m) => Failure::Config(m),
        other => Failure::Other(other.into()),
    })?;
    let dir = config
        .out
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out").join(config.experiment.name()));
    outcome
        .table
        .write_dir(&dir, &config, &outcome.diagnostics)
        .with_context(|| format!("writing results to {}", dir.display()))?;
    if config.experiment == ExperimentKind::Selftest {
        if let Some(checks) = outcome.diagnostics["checks"].as_array() {
            for c in checks {
                let verdict = if c["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
                println!("{verdict} {} ({})", c["name"].as_str().unwrap_or(""), c["detail"].as_str().unwrap_or(""));
            }
        }
    }
    println!(
        "{}: {} rows written to {}",
        config.experiment.name(),
        outcome.table.rows.len(),
        dir.display()
    );
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("selftest failed");
            ExitCode::from(EXIT_SELFTEST)
        }
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
