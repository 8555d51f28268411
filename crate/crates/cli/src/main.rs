//! `adiaphase`: simulate adiabatic phase evolution from a JSON config,
//! verify basis independence of observables, and run parameter sweeps.
//!
//! Exit codes: 0 success, 1 tolerance failure, 2 configuration error,
//! 3 physics precondition violation (degenerate spectrum).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod output;
mod runner;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Physics(String),
    Tolerance(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Physics(msg) => write!(f, "physics precondition violated: {msg}"),
            CliError::Tolerance(msg) => write!(f, "tolerance failure: {msg}"),
            CliError::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Physics(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "adiaphase", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation: phases.csv, states.csv, expectations.csv, report.json.
    Simulate {
        config: PathBuf,
        /// Output directory (overrides ADIAPHASE_OUT and the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check observable basis independence across gauges; exit 0 iff all
    /// discrepancies stay below tolerance.
    Verify {
        config: PathBuf,
        /// Draw K random Fourier gauges instead of the configured one.
        #[arg(long)]
        random_gauges: Option<usize>,
        /// Seed for the random gauges (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured discrepancy tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the configured parameter sweep and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out_dir } => {
            let config = RunConfig::load(&config)?;
            let out_dir = runner::resolve_out_dir(out_dir, &config)?;
            runner::cmd_simulate(&config, &out_dir)
        }
        Command::Verify {
            config,
            random_gauges,
            seed,
            tolerance,
            out_dir,
        } => {
            let config = RunConfig::load(&config)?;
            let out_dir = runner::resolve_out_dir(out_dir, &config)?;
            runner::cmd_verify(&config, &out_dir, random_gauges, seed, tolerance)
        }
        Command::Sweep { config, out_dir } => {
            let config = RunConfig::load(&config)?;
            let out_dir = runner::resolve_out_dir(out_dir, &config)?;
            runner::cmd_sweep(&config, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
