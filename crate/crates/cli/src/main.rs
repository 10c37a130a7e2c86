//! `alphacent` command-line front end.

mod commands;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Outcome, EXIT_INPUT};

#[derive(Debug, Parser)]
#[command(name = "alphacent", version, about = "Distributed alpha-centrality estimation, consensus and control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate centralities with the distributed fixed-point iteration.
    Estimate(EstimateArgs),
    /// Centrality-weighted consensus.
    Consensus(ConsensusArgs),
    /// Minimum-norm weight adjustment reaching a target centrality.
    Control(ControlArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file; flags override its values.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Graph file (control file for `control`).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Attenuation factor.
    #[arg(long, conflicts_with = "alpha_margin")]
    pub alpha: Option<f64>,
    /// Attenuation as a fraction of 1/sqrt(‖W‖₁‖W‖∞).
    #[arg(long)]
    pub alpha_margin: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Seed for random graphs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluate agents of each round on a thread pool.
    #[arg(long)]
    pub parallel: bool,
    /// Log every message read and write audit.txt.
    #[arg(long)]
    pub audit_locality: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Seed vector, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// Start from zero instead of the seed vector.
    #[arg(long)]
    pub zero_start: bool,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// Initial values, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Perron step size (default 1/(d_max+1)).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Run without the centrality correction (plain average).
    #[arg(long)]
    pub no_correction: bool,
}

#[derive(Debug, Args)]
pub struct ControlArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `enumeration` or `breakpoints`.
    #[arg(long)]
    pub solver: Option<String>,
    /// `file`, `ones` or `uniform:<r>`.
    #[arg(long)]
    pub target: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Consensus(a) => commands::consensus(a),
        Command::Control(a) => commands::control(a),
    };
    match result {
        Ok(Outcome { code, message }) => {
            if let Some(m) = message {
                eprintln!("{m}");
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
