//! `carleman-lab`: runs the geometry, weight, forward, Carleman and inverse
//! experiments from a TOML configuration.
//!
//! Exit status: 0 on success, 1 on a runtime failure, 2 on a configuration
//! error (the message names the field path), 3 when a required hypothesis
//! fails (the report is printed on stdout and written to the output
//! directory).

mod artifacts;
mod commands;
mod config;
mod setup;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use carleman_lab::weight::HypothesisReport;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::config::{ExperimentConfig, SchemaError};

#[derive(Debug)]
pub enum CliError {
    Schema(SchemaError),
    Hypothesis { report: HypothesisReport, document: Value },
    Run(String),
}

impl CliError {
    pub fn schema(path: &str, message: impl Into<String>) -> Self {
        CliError::Schema(SchemaError {
            path: path.to_string(),
            message: message.into(),
        })
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Run(format!("{}: {e}", path.display()))
    }
}

impl From<carleman_lab::Error> for CliError {
    fn from(e: carleman_lab::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "carleman-lab", version, about = "Carleman weight and inverse potential experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SeededArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Overrides the seed of the relevant config section.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Number of perturbations (overrides `inverse.n_perturbations`).
    #[arg(long)]
    n: Option<usize>,
    /// Overrides `inverse.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Strong convexity of the interface.
    GeometryCheck(ConfigArg),
    /// Hypotheses of the weight at x0 and the pair at x1, x2.
    WeightVerify(ConfigArg),
    /// Forward solve with field and trace export; cached by config hash.
    SolveForward(ConfigArg),
    /// Carleman ratio sweep over test fields and (s, lambda).
    CarlemanSweep(SeededArgs),
    /// Reconstruct the potential from the boundary trace.
    Invert(SeededArgs),
    /// Empirical Lipschitz stability sweep.
    Stability(StabilityArgs),
}

fn load(path: &Path, adjust: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path).map_err(CliError::Schema)?;
    adjust(&mut cfg);
    cfg.validate().map_err(CliError::Schema)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::GeometryCheck(a) => commands::geometry_check(&load(&a.config, |_| {})?),
        Command::WeightVerify(a) => commands::weight_verify(&load(&a.config, |_| {})?),
        Command::SolveForward(a) => commands::solve_forward_cmd(&load(&a.config, |_| {})?),
        Command::CarlemanSweep(a) => commands::carleman_sweep(&load(&a.config.config, |c| {
            if let Some(s) = a.seed {
                c.carleman.seed = s;
            }
        })?),
        Command::Invert(a) => commands::invert(&load(&a.config.config, |c| {
            if let (Some(s), Some(noise)) = (a.seed, c.inverse.noise.as_mut()) {
                noise.seed = s;
            }
        })?),
        Command::Stability(a) => commands::stability(&load(&a.config.config, |c| {
            if let Some(n) = a.n {
                c.inverse.n_perturbations = n;
            }
            if let Some(s) = a.seed {
                c.inverse.seed = s;
            }
        })?),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(doc) => {
            println!("{}", pretty(&doc));
            ExitCode::SUCCESS
        }
        Err(CliError::Schema(e)) => {
            eprintln!("config error at {e}");
            ExitCode::from(2)
        }
        Err(CliError::Hypothesis { report, document }) => {
            println!("{}", pretty(&document));
            for r in report.failures() {
                eprintln!("hypothesis {} failed: value {}, margin {}", r.name, r.value, r.margin);
            }
            if report.records.is_empty() {
                eprintln!("hypothesis failed: interface is not strongly convex");
            }
            ExitCode::from(3)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
