//! `mape-smo`: train, predict, validate and generate data from the command line.
//!
//! Exit codes: 0 success, 1 internal or output error, 2 input error,
//! 3 iteration budget exhausted, 4 validation failure, 5 reference solver did
//! not certify (comparison unasserted).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mape_smo::Symmetry;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_MAX_ITER: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
pub const EXIT_UNASSERTED: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "mape-smo", version, about = "SMO training for epsilon-SVR with MAPE loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write it to disk.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Compare SMO against the reference QP solver.
    Validate(ValidateArgs),
    /// Write a built-in synthetic dataset as CSV.
    Gen(GenArgs),
}

/// Where the training data comes from.
#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Dataset CSV with a `y` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Built-in configuration C1..C10.
    #[arg(long)]
    pub config: Option<String>,
}

/// Hyperparameters. Unset values come from the built-in configuration, or
/// from the library defaults for CSV input.
#[derive(Args, Debug, Clone)]
pub struct HyperArgs {
    /// Regularization constant C.
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// Tube half-width in percent.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RBF coefficient in exp(-gamma |x - x'|^2).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// m1, m2+ (even) or m2- (odd).
    #[arg(long)]
    pub variant: Option<Symmetry>,
    /// Stopping tolerance, relative to the mean target.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Loop passes between shrink checks [default: min(N, 1000)].
    #[arg(long)]
    pub n_check: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub n_freeze: usize,
    #[arg(long)]
    pub no_shrink: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Model output path.
    #[arg(long)]
    pub model: PathBuf,
    /// Optional trace CSV `iter,delta,active_count,event`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of features; a `y` column, if present, is used for MAPE.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Reference solver tolerance, relative to the mean target.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_ref: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub ref_max_iter: usize,
    /// Override the max |f_SMO - f_ref| limit.
    #[arg(long)]
    pub max_diff: Option<f64>,
    /// Override the mean |f_SMO - f_ref| limit.
    #[arg(long)]
    pub mean_diff: Option<f64>,
    /// Allow more than 500 training points.
    #[arg(long)]
    pub allow_large: bool,
    /// Report CSV output path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Configuration id, C1..C10.
    pub config: String,
    #[arg(long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Validate(a) => commands::validate(a),
        Command::Gen(a) => commands::gen(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            println!("exit_status = {}", e.code);
            ExitCode::from(e.code)
        }
    }
}
