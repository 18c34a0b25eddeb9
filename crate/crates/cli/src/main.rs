//! `dsrkit` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod config;
mod fit;
mod format;
mod plot;
mod report;
mod simulate;

/// Errors that end the process. Configuration and usage problems exit
/// with status 2, estimator and I/O failures with status 1.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(name = "dsrkit", version, about = "Spatial confounding estimators and simulation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study from a TOML config or a run manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "DSRKIT_THREADS")]
        threads: Option<usize>,
        /// Also write per-replication estimates to `reps.csv`.
        #[arg(long)]
        keep_reps: bool,
    },
    /// Fit one estimator to a CSV data set.
    Fit(fit::FitArgs),
    /// Render the metrics written by `simulate`.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
        /// Write `density.svg` next to each `reps.csv`.
        #[arg(long)]
        plot: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, out, reps, seed, threads, keep_reps } => {
            simulate::run(&simulate::SimulateArgs { config, out, reps, seed, threads, keep_reps })
        }
        Command::Fit(args) => fit::run(&args),
        Command::Report { input, format, plot } => report::run(&input, format, plot),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
