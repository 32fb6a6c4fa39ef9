mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Littlewood-Paley norms, pseudo-differential operators, audits and
/// sharpness experiments on the torus. Results are written as JSON and CSV.
///
/// Exit status: 0 when every report passes, 1 when one fails, 2 on a
/// configuration or runtime error.
#[derive(Debug, Parser)]
#[command(name = "lpkit", version)]
pub struct Cli {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory [default: $LPKIT_OUT, else ./lpkit-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for parallel loops.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Besov or Triebel-Lizorkin norm of a grid function.
    Norm(NormArgs),
    /// Apply a registered symbol to a grid function.
    Apply(ApplyArgs),
    /// Paradifferential decomposition of a registered symbol.
    Decompose(DecomposeArgs),
    /// Run a suite of audits, or one audit by name.
    Audit(AuditArgs),
    /// Run a sharpness experiment.
    Experiment(ExperimentArgs),
    /// List symbols, test functions, audits and experiments.
    Registry,
}

#[derive(Debug, Args, Default)]
pub struct SourceArgs {
    /// Grid function file (lpkit-gridfunction text format).
    #[arg(long, conflicts_with = "function")]
    pub input: Option<PathBuf>,
    /// Catalog test function, built on a unit-period grid.
    #[arg(long)]
    pub function: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Test-function parameter, `key=value`.
    #[arg(long = "fparam", value_name = "KEY=VALUE")]
    pub function_params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct NormArgs {
    /// F (Triebel-Lizorkin) or B (Besov).
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(long)]
    pub symbol: Option<String>,
    /// Symbol parameter, `key=value`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Where to write the result [default: <out>/apply-output.dat].
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub symbol: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub period: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, conflicts_with = "name")]
    pub suite: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
    /// Override `key=value`; a leading audit name routes the key to it.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Inclusive range of top scales, `a..b`.
    #[arg(long = "L", value_name = "A..B")]
    pub l_range: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
