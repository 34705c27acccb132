//! clinsvm: clinical SVM toolkit command line.
//!
//! Exit codes are a stable scripting contract: 0 success, 1 usage error,
//! 2 data error, 3 solver non-convergence (outputs are still written).

mod commands;
mod split;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "clinsvm",
    version,
    about = "Encode clinical records, train linear soft-margin SVMs, and report diagnoses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a clinical CSV into labeled vectors
    Encode(EncodeArgs),
    /// Train a model and write it with its evaluation
    Train(TrainArgs),
    /// Evaluate a saved model against a dataset
    Evaluate(EvaluateArgs),
    /// Predict labels for a vector literal or a CSV of records
    Predict(PredictArgs),
    /// Diagnose one record against a registry of per-disease models
    Report(ReportArgs),
    /// Generate a synthetic two-cluster cohort
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding schema JSON
    #[arg(long)]
    pub schema: PathBuf,
    /// Output path (.json writes the dataset document, anything else CSV);
    /// stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rescale every dimension to mean 0, deviation 1
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training CSV with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding schema JSON
    #[arg(long)]
    pub schema: PathBuf,
    /// Where to write the model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Where to write the evaluation JSON (default: next to the model)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Soft-margin box constant
    #[arg(long = "C", default_value_t = 1.0, allow_negative_numbers = true)]
    pub c: f64,
    /// KKT tolerance for the solver
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    pub tol: f64,
    /// Solver step budget, in sweeps of l pair updates
    #[arg(long, default_value_t = 1000)]
    pub max_passes: usize,
    /// Standardize the training data; the model stores the transform
    #[arg(long)]
    pub standardize: bool,
    /// Fraction held out for evaluation (0 evaluates on the training data)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub holdout: f64,
    /// Seed driving every random choice of the run
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train a recursive partition tree instead of a single hyperplane
    #[arg(long)]
    pub tree: bool,
    /// Maximum tree depth in splits
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    /// Minimum points each side of a split must keep
    #[arg(long = "min-leaf", default_value_t = 5)]
    pub min_leaf: usize,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Evaluation CSV with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding schema JSON
    #[arg(long)]
    pub schema: PathBuf,
    /// Model file to evaluate
    #[arg(long)]
    pub model: PathBuf,
    /// Output path (.json writes the evaluation document, anything else the
    /// text table); stdout always shows the table
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluate on this held-out fraction of the data instead of all of it
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub holdout: f64,
    /// Seed for the holdout split
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Model file
    #[arg(long)]
    pub model: PathBuf,
    /// One raw vector literal, e.g. "(0,3)"
    #[arg(long, allow_hyphen_values = true)]
    pub vector: Option<String>,
    /// CSV of records to predict (requires --schema)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Encoding schema JSON for --data
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Output path (.json or .csv); stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Registry manifest JSON
    #[arg(long)]
    pub registry: PathBuf,
    /// CSV holding exactly one clinical record
    #[arg(long)]
    pub data: PathBuf,
    /// Output path (.json writes the report document, anything else the text
    /// table); stdout always shows the table
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Where to write the cohort CSV
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a matching all-numeric schema JSON here
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Points per class
    #[arg(long, default_value_t = 100)]
    pub n_per_class: usize,
    /// Feature dimensions
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Distance between the two cluster centers, in within-cluster deviations
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub separation: f64,
    /// Fraction of each class resampled from the opposite cluster
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub overlap: f64,
    /// Seed driving the generator
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Errors carrying their exit-code category.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameters; nothing was read or written. Exit 1.
    Usage(String),
    /// Unreadable or inconsistent inputs. Exit 2.
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
        }
    }
}

/// Successful run, or one that produced outputs from a non-converged solve.
pub enum Outcome {
    Success,
    SolverDidNotConverge,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Encode(args) => commands::encode(&args),
        Command::Train(args) => commands::train(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Predict(args) => commands::predict(&args),
        Command::Report(args) => commands::report(&args),
        Command::Synth(args) => commands::synth(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::SolverDidNotConverge) => {
            eprintln!("warning: solver did not converge; outputs were written from the best iterate");
            ExitCode::from(3)
        }
        Err(e) => {
            match &e {
                CliError::Usage(msg) | CliError::Data(msg) => eprintln!("error: {msg}"),
            }
            e.exit_code()
        }
    }
}
