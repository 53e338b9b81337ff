//! `mildvol`: simulation, estimation and Monte Carlo validation runs.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mildvol", version, about = "Semigroup-adjusted volatility experiments")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides the config's `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo replications.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path and export it.
    Simulate,
    /// Simulate one path and estimate the integrated volatility.
    Estimate,
    /// Error of the estimator across the n grid.
    ValidateLln,
    /// Coverage and normality of the feasible intervals.
    ValidateClt,
    /// Built-in divergence demonstrations.
    Counterexample {
        #[arg(value_enum)]
        which: Which,
        /// Hurst index of the fractional Brownian path.
        #[arg(long)]
        hurst: Option<f64>,
        /// Monte Carlo replications per n.
        #[arg(long)]
        replications: Option<usize>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
    },
    /// Classify the model by the regularity of its volatility.
    RegimeReport,
    /// Grid-sampled Sobolev-shift pipeline.
    DiscreteDemo,
    /// Locally averaged heat-equation pipeline.
    HeatDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    RvLln,
    RvClt,
    SarcvCltSharpness,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(commands::Status::Passed) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                mildvol::Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
