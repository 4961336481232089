mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::UsageError;

#[derive(Parser)]
#[command(version, about = "Sparse regression with a reversed adaptive penalty (SACE/GSACE)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one estimator at fixed hyperparameters
    Fit(FitArgs),
    /// Tune an estimator by K-fold cross-validation
    Cv(CvArgs),
    /// Run the simulation study and write its tables
    Simulate(SimulateArgs),
    /// Rolling-window sparse index tracking
    Track(TrackArgs),
}

/// Flags shared by every subcommand. Values given on the command line win
/// over the config file.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Optional `key = value` file supplying any flag below by its long name
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV with a header; first column is the response
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// lasso, en, mcp, sace or gsace [default: sace]
    #[arg(long)]
    pub method: Option<String>,
    /// Penalty level (required)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the reversed penalty, in [0, 1] [default: 0]
    #[arg(long)]
    pub d: Option<f64>,
    /// MCP concavity [default: 3]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Elastic Net ridge weight [default: 0.5]
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Standardize before fitting and report raw-scale slopes too [default: false]
    #[arg(long)]
    pub standardize: bool,
    /// Coordinate-descent sweep limit [default: 10000]
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct CvArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset CSV with a header; first column is the response
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// lasso, en, mcp, sace or gsace [default: sace]
    #[arg(long)]
    pub method: Option<String>,
    /// Number of folds [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Points on the λ grid [default: 30]
    #[arg(long)]
    pub n_lambda: Option<usize>,
    /// Smallest λ as a fraction of λ_max [default: 0.01]
    #[arg(long)]
    pub lambda_min_ratio: Option<f64>,
    /// Comma-separated d grid [default: 0,0.1,...,1]
    #[arg(long)]
    pub ds: Option<String>,
    /// Comma-separated γ grid [default: 1.5,3,6]
    #[arg(long)]
    pub gammas: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Example design, 1 (grouped) or 2 (equicorrelated) [default: 1]
    #[arg(long)]
    pub example: Option<u8>,
    /// Case 1-4; 0 runs all four [default: 0]
    #[arg(long)]
    pub case: Option<usize>,
    /// Replications per case [default: 100]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Comma-separated methods [default: lasso,en,mcp,sace,gsace]
    #[arg(long)]
    pub method: Option<String>,
    /// Number of CV folds [default: 10]
    #[arg(long)]
    pub folds: Option<usize>,
    /// Points on the λ grid [default: 30]
    #[arg(long)]
    pub n_lambda: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrackArgs {
    #[command(flatten)]
    pub common: Common,
    /// Price CSV: date,index,ticker1,... (omit with --synthetic)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use the built-in synthetic panel (T = 1160) instead of --input [default: false]
    #[arg(long)]
    pub synthetic: bool,
    /// Comma-separated methods [default: lasso,sace]
    #[arg(long)]
    pub method: Option<String>,
    /// Assets to hold [default: 50]
    #[arg(long)]
    pub k: Option<usize>,
    /// Training rows per window [default: 100]
    #[arg(long)]
    pub train: Option<usize>,
    /// Test rows per window [default: 20]
    #[arg(long)]
    pub test: Option<usize>,
    /// Rows between window starts [default: 20]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Fixed d when not tuning [default: 0]
    #[arg(long)]
    pub d: Option<f64>,
    /// Fixed γ when not tuning [default: 3]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Skip cross-validation of d, γ and λ₂ [default: false]
    #[arg(long)]
    pub no_tune: bool,
    /// Tracking errors on returns instead of price levels [default: false]
    #[arg(long)]
    pub returns: bool,
}

/// Exit code for an error: 2 for bad input, 3 for non-convergence.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<commands::NotConverged>() {
            return 3;
        }
        if cause.is::<UsageError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<sace_core::Error>() {
            return match e {
                sace_core::Error::NoConvergence(_) => 3,
                _ => 2,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Cv(a) => commands::cv(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Track(a) => commands::track(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
