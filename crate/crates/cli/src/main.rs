//! `microvol` command-line front end.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "microvol", version, about = "Poisson microstructure prelimit of rough Bergomi")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides `experiment.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV, JSON and SVG outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate prelimit price/volatility paths.
    Paths(PathsArgs),
    /// Sample the Gaussian limit (or approximate) model and price by Euler.
    Refsim(RefsimArgs),
    /// Integer price moment from the word expansion.
    Moments(MomentsArgs),
    /// Kernel error functionals over a dyadic range of n.
    Functionals(FunctionalsArgs),
    /// Weak-error experiment for the configured functional.
    WeakError(WeakErrorArgs),
    /// Numerical audit of the kernel assumptions.
    KernelAudit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    TwoSided,
    Rl,
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    /// Arrival rate (defaults to `kernel.n`).
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub replications: usize,
    /// Number of grid points on [0, T].
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long)]
    pub no_svg: bool,
}

#[derive(Debug, Args)]
pub struct RefsimArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Rl)]
    pub variant: VariantArg,
    /// Number of time steps K.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Use the configured prelimit kernel (approximate model) instead of the limit.
    #[arg(long)]
    pub approx: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Limit,
    Approx,
    Prelimit,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    /// Moment order.
    #[arg(long = "N", short = 'N')]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Limit)]
    pub model: ModelArg,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Rl)]
    pub variant: VariantArg,
    /// Gauss nodes per nesting level (the check rule uses 1.5x).
    #[arg(long, default_value_t = 32)]
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Benchmark,
    Optimized,
    Shift,
}

#[derive(Debug, Args)]
pub struct FunctionalsArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub n_min: u64,
    #[arg(long, default_value_t = 4096)]
    pub n_max: u64,
    /// Include the pre-zero part of ⋆ and of the covariances.
    #[arg(long)]
    pub pre_zero: bool,
}

#[derive(Debug, Args)]
pub struct WeakErrorArgs {
    /// Replications per n (overrides `experiment.samples`).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated n list (overrides `experiment.ns`).
    #[arg(long)]
    pub ns: Option<String>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 3.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] microvol::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(#[from] rayon::ThreadPoolBuildError),
    /// Results were written but the rate fit has too few usable points.
    #[error("rate fit inconclusive: {0}")]
    Inconclusive(String),
    /// Results were written but the fitted slope lies outside the admissible window.
    #[error("rate fit contradicts the admissible slope window: {0}")]
    Contradicting(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use microvol::Error as E;
        match self {
            CliError::Core(E::Accuracy { .. } | E::Factorization { .. }) => 3,
            CliError::Core(E::Io(_)) | CliError::Io(_) | CliError::Json(_) | CliError::Threads(_) => 1,
            CliError::Core(_) => 2,
            CliError::Inconclusive(_) => 4,
            CliError::Contradicting(_) => 5,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
