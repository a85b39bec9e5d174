//! `mcmc-cv`: run control-variate experiments from JSON configs.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 runtime or
//! statistical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Globals;

#[derive(Parser)]
#[command(name = "mcmc-cv", version, about = "Control-variate variance reduction for MCMC")]
struct Cli {
    /// Master seed (overrides the config's `master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications (0 = one per core).
    #[arg(long, global = true, env = "MCMC_CV_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Add a small ridge (1e-10 trace/k) to coefficient solves.
    #[arg(long, global = true)]
    ridge: bool,
    /// Validate and print what would run, without sampling.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poisson-equation coefficients of a Gaussian random-scan Gibbs sampler.
    Theorem1 {
        /// Covariance as a JSON file or inline JSON: a matrix, or {"mean", "cov"}.
        #[arg(long)]
        cov: String,
        /// Coordinate (1-based) whose mean is estimated.
        #[arg(long, default_value_t = 1)]
        coordinate: usize,
    },
    /// Run one chain and write its trajectory CSV.
    Sample {
        config: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Also write the control-variate panel of the config's functional and basis.
        #[arg(long)]
        panel: bool,
    },
    /// Plain and control-variate estimates from a panel or trajectory CSV.
    Estimate {
        #[arg(long, conflicts_with_all = ["trajectory", "config"])]
        panel: Option<PathBuf>,
        #[arg(long, requires = "config")]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a replication experiment and write CSV and JSON reports.
    Experiment { config: PathBuf },
    /// Compare K against batch-means coefficients for several lags.
    CompareBatchMeans {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,5,10,20")]
        lags: Vec<usize>,
    },
}

pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let g = Globals {
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out,
        ridge: cli.ridge,
        dry_run: cli.dry_run,
    };
    let result = match &cli.command {
        Command::Theorem1 { cov, coordinate } => commands::theorem1(&g, cov, *coordinate),
        Command::Sample { config, steps, panel } => commands::sample(&g, config, *steps, *panel),
        Command::Estimate {
            panel,
            trajectory,
            config,
        } => commands::estimate_cmd(&g, panel.as_deref(), trajectory.as_deref(), config.as_deref()),
        Command::Experiment { config } => commands::experiment(&g, config),
        Command::CompareBatchMeans { config, lags } => commands::compare(&g, config, lags),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
