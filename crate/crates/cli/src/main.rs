//! `nhpp`: simulate, estimate, predict and risk-check from the command line.
//!
//! Exit codes: 0 success, 1 failed gate, 2 configuration or I/O error,
//! 3 failed MCMC diagnostics (outputs are still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

mod commands;
mod config;
mod parse;
mod svg;

use config::{merge, EstimateArgs, Figure1Args, PredictArgs, RiskArgs, SimulateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Gate(String),
    #[error("{0}")]
    Diagnostic(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Gate(_) => 1,
            CliError::Config(_) => 2,
            CliError::Diagnostic(_) => 3,
        }
    }
}

impl From<nhpp_shrink::Error> for CliError {
    fn from(e: nhpp_shrink::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "nhpp", version, about = "Shrinkage-prior Bayes estimation for Poisson processes")]
struct Cli {
    /// JSON config; command-line flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a point pattern from a named intensity.
    Simulate(SimulateArgs),
    /// Bayes estimates of the intensity for one or more exponents gamma.
    Estimate(EstimateArgs),
    /// Log predictive scores of future patterns.
    Predict(PredictArgs),
    /// Run a verification gate or a Monte Carlo risk table.
    Risk(RiskArgs),
    /// Recompute the published example: data, estimates and SVG.
    Figure1(Figure1Args),
}

/// Prints the resolved config as one JSON line on stderr.
pub(crate) fn echo_config<T: Serialize>(resolved: &T) {
    eprintln!("{}", config::echo(resolved));
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => commands::simulate(&mut merge(file, &a)?),
        Command::Estimate(a) => commands::estimate(&mut merge(file, &a)?),
        Command::Predict(a) => commands::predict(&mut merge(file, &a)?),
        Command::Risk(a) => commands::risk(&mut merge(file, &a)?),
        Command::Figure1(a) => commands::figure1(&mut merge(file, &a)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
