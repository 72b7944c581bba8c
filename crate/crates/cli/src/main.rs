//! `baskakov`: evaluate the shifted Baskakov-type operators, audit the moment
//! identities and tabulate convergence.
//!
//! Exit codes: 0 success, 1 usage, 2 series non-convergence, 3 unexpected
//! audit discrepancy, 4 I/O failure.

mod commands;
mod config;
mod dsl;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use baskakov::TruncationPolicy;
use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    NonConvergence(String),
    Discrepancy(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Discrepancy(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::NonConvergence(m) | CliError::Discrepancy(m) | CliError::Io(m) => m,
        }
    }
}

impl From<baskakov::Error> for CliError {
    fn from(e: baskakov::Error) -> Self {
        match e {
            baskakov::Error::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "baskakov", version, about = "Shifted Baskakov-type operators: evaluation, moment audits, convergence tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate L(f; x) at one point
    Eval(EvalArgs),
    /// Audit the closed-form moment identities against the series
    Audit(AuditArgs),
    /// Tabulate the error, its Voronovskaya scaling and the error bounds along an n ladder
    Converge(ConvergeArgs),
    /// Tabulate the error against the weighted second modulus along an n ladder
    Direct(DirectArgs),
    /// Extract two-column data files from a CSV written by this tool
    Plotdata(PlotArgs),
}

#[derive(Args, Clone)]
pub struct PolicyArgs {
    /// Stop once the weight mass reaches 1 - mass_eps
    #[arg(long, default_value_t = TruncationPolicy::default().mass_epsilon)]
    pub mass_eps: f64,
    /// Relative size below which a series term counts as small
    #[arg(long, default_value_t = TruncationPolicy::default().term_epsilon)]
    pub term_eps: f64,
    /// Number of consecutive small terms required to stop
    #[arg(long, default_value_t = TruncationPolicy::default().consecutive_small)]
    pub consecutive_small: u32,
    /// Hard cap on the number of series terms
    #[arg(long, default_value_t = TruncationPolicy::default().k_max)]
    pub k_max: u64,
}

#[derive(Args, Clone)]
pub struct ShiftArgs {
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub n: Option<u64>,
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[arg(long)]
    pub x: Option<f64>,
    /// poly:c0,c1,... | expneg:rate | abs:center | sqrt1p
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Take every setting from a configuration or a previous output file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct AuditArgs {
    /// Parameter grid preset: standard or smoke
    #[arg(long, default_value = "standard")]
    pub grid: String,
    /// Comma list of n, replacing the preset's
    #[arg(long)]
    pub n: Option<String>,
    /// Comma list of a, replacing the preset's
    #[arg(long)]
    pub a: Option<String>,
    /// Comma list of alpha, paired with --beta
    #[arg(long)]
    pub alpha: Option<String>,
    /// Comma list of beta, paired with --alpha
    #[arg(long)]
    pub beta: Option<String>,
    /// Comma list of x, replacing the preset's
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub limit_tolerance: f64,
    /// Comma list of n for the limit extrapolation
    #[arg(long, default_value = "16,32,64,128,256,512,1024,2048,4096,8192,16384")]
    pub n_ladder: String,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// JSON report path, or CSV when it ends in .csv; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct ConvergeArgs {
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[arg(long)]
    pub x: Option<f64>,
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[arg(long, default_value = "16,32,64,128,256,512,1024,2048,4096,8192,16384")]
    pub n_ladder: String,
    /// Upper end of the modulus window; per-row default when absent
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, default_value_t = 512)]
    pub grid_points: usize,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct DirectArgs {
    #[arg(long = "fn")]
    pub function: Option<String>,
    #[arg(long)]
    pub x: Option<f64>,
    #[command(flatten)]
    pub shift: ShiftArgs,
    /// Exponent of the step weight, in [0, 1]
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value = "16,32,64,128,256,512,1024,2048,4096")]
    pub n_ladder: String,
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, default_value_t = 512)]
    pub grid_points: usize,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Comma list of column names
    #[arg(long)]
    pub series: Option<String>,
    /// Column used for x; the first column when absent
    #[arg(long)]
    pub x_column: Option<String>,
    /// Output prefix; files are <prefix>_<series>.dat
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Eval(args) => commands::eval(args),
        Command::Audit(args) => commands::audit(args),
        Command::Converge(args) => commands::converge(args),
        Command::Direct(args) => commands::direct(args),
        Command::Plotdata(args) => commands::plotdata(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
