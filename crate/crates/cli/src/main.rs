//! `thiele`: reserves, Monte Carlo estimates and the ODE-versus-simulation
//! gate for a JSON model document.
//!
//! Exit codes: 0 success, 1 disagreement in `compare` or an output error,
//! 2 invalid config or arguments, 3 numeric failure in a solver.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "thiele", version, about = "Multi-state life insurance reserves by Thiele's equation and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reserve equations and write the curves as CSV.
    Reserve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the reserves of the configured targets by simulation.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        mc: McArgs,
        /// Also write every simulated path, one `paths_<k>.csv` per target.
        #[arg(long)]
        dump_paths: bool,
    },
    /// Solve and simulate; fails unless |z| < 4 for every target.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        mc: McArgs,
        /// Directory for compare.json and a manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print its diagnostics.
    Validate { config: PathBuf },
}

#[derive(Args, Clone, Copy)]
struct McArgs {
    /// Number of paths; defaults to the config's simulation.paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Base seed; defaults to the config's simulation.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every simulated intensity. For testing the gate.
    #[arg(long, hide = true, default_value_t = 1.0)]
    perturb_mc_rates: f64,
}

/// Why a command stopped.
pub enum Failure {
    /// Bad config or arguments; the messages go to stderr.
    Invalid(Vec<String>),
    Numeric(String),
    /// `compare` found a disagreement; the report is already on stdout.
    Disagreement,
    Output(String),
}

impl From<thiele::Error> for Failure {
    fn from(e: thiele::Error) -> Self {
        use thiele::Error as E;
        match e {
            e if e.is_numeric() => Failure::Numeric(e.to_string()),
            E::Config(messages) => Failure::Invalid(messages),
            E::Io(_) | E::Csv(_) => Failure::Output(e.to_string()),
            other => Failure::Invalid(vec![other.to_string()]),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e.to_string())
    }
}

fn limit_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("THIELE_THREADS") else {
        return Ok(());
    };
    let n: usize =
        value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            Failure::Invalid(vec![format!("THIELE_THREADS must be a positive integer, got {value:?}")])
        })?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Output(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    limit_threads()?;
    match cli.command {
        Command::Reserve { config, out } => commands::reserve(&config, &out),
        Command::Simulate { config, out, mc, dump_paths } => commands::simulate(&config, &out, mc, dump_paths),
        Command::Compare { config, mc, out } => commands::compare(&config, mc, out.as_deref()),
        Command::Validate { config } => commands::validate(&config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(messages)) => {
            for m in messages {
                eprintln!("error: {m}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numeric failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Disagreement) => ExitCode::from(1),
        Err(Failure::Output(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
