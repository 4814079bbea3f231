//! `cybersick` command line: synthetic data, validation, cross-validated
//! training, checkpoint evaluation, attribution and plot tables.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! for runtime failures such as I/O.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
mod flags;
mod plot;

pub use flags::ConfigFlags;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "cybersick",
    version,
    about = "Cybersickness severity from per-frame embedding sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic manifest and FSEQ feature files.
    Synth(SynthArgs),
    /// Check a manifest and print dataset statistics.
    Validate(ValidateArgs),
    /// Run stratified k-fold training and write reports and checkpoints.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest.
    Eval(EvalArgs),
    /// Write attribution maps and temporal-importance curves.
    Attribute(AttributeArgs),
    /// Turn metrics or importance CSVs into wide plot tables.
    ExportPlot(ExportPlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with synthetic-data settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Frames per labeled minute
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset manifest (JSON)
    #[arg(long)]
    pub data: PathBuf,
    /// Flat JSON training configuration; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Folds trained in parallel; results do not depend on it
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model checkpoint (.ssm); its .json sidecar supplies reduction and binning
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated sample ids; all samples when absent
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<usize>,
    /// Directory for eval.json
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated sample ids; all samples when absent
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// standard or integrated
    #[arg(long, default_value = "integrated")]
    pub method: String,
    /// logit, probability or class:N
    #[arg(long, default_value = "logit")]
    pub target: String,
    /// Riemann steps for integrated gradients
    #[arg(long, default_value_t = 50)]
    pub ig_steps: usize,
    /// zeros, or an FSEQ file holding one reduced input
    #[arg(long, default_value = "zeros")]
    pub baseline: String,
    /// mean-abs or l2
    #[arg(long, default_value = "mean-abs")]
    pub aggregation: String,
}

#[derive(Debug, Args)]
pub struct ExportPlotArgs {
    /// metrics.csv from train, or step,importance CSVs from attribute
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
