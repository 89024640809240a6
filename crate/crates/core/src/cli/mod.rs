//! The `facetopo` command line.
//!
//! Every command reads an optional TOML run config (`--config`), applies flag
//! overrides, writes `effective-config.toml` next to its artifacts and never
//! embeds timestamps, so reruns with the same inputs overwrite identical
//! bytes. Global flags also read `FACETOPO_CONFIG`, `FACETOPO_SEED` and
//! `FACETOPO_THREADS`.
//!
//! Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 failed check.

mod commands;
mod config;

pub use config::{BenchConfig, RunConfig, SplitConfig};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "facetopo", version, about = "Spanning-tree topology learning for landmark sequences")]
pub struct Cli {
    /// TOML run config; flags override its values.
    #[arg(long, global = true, env = "FACETOPO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for data generation, splits, initialization and search.
    #[arg(long, global = true, env = "FACETOPO_SEED")]
    pub seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "FACETOPO_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic planted-topology dataset directory.
    Synth(SynthArgs),
    /// Search for a spanning tree with the particle swarm.
    Optimize(OptimizeArgs),
    /// Train on a frozen tree (learned first when no tree is given).
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// Run the four ablations against the full model.
    Ablate(AblateArgs),
    /// Train on independent random trees and report the RR spread.
    BenchRandomTrees(BenchArgs),
    /// Compare analytic gradients with central differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output dataset directory.
    #[arg(long, default_value = "runs/synth")]
    pub out: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub landmarks: Option<usize>,
    #[arg(long)]
    pub samples_per_class: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub texture_amplitude: Option<f64>,
    /// Image side in pixels; 0 disables images.
    #[arg(long)]
    pub image_size: Option<usize>,
}

/// Flags shared by every command that trains models.
#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// LSTM hidden width.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Fusion encoder width.
    #[arg(long)]
    pub fusion_dim: Option<usize>,
}

/// Flags shared by every command that runs the topology search.
#[derive(Debug, Args)]
pub struct SwarmFlags {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub swarm_size: Option<usize>,
    #[arg(long)]
    pub inner_epochs: Option<usize>,
    /// Traversal root landmark.
    #[arg(long)]
    pub root: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/optimize")]
    pub out: PathBuf,
    #[command(flatten)]
    pub swarm: SwarmFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
    /// `tree.json` from a previous optimize or train run.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub swarm: SwarmFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/eval")]
    pub out: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/ablate")]
    pub out: PathBuf,
    /// Learned tree; searched first when absent.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub swarm: SwarmFlags,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "runs/bench-random-trees")]
    pub out: PathBuf,
    /// Number of random trees.
    #[arg(long)]
    pub trees: Option<usize>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub swarm: SwarmFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value = "runs/gradcheck")]
    pub out: PathBuf,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Test hook: perturb one component's analytic gradient.
    #[arg(long, hide = true)]
    pub corrupt: Option<String>,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(Error::Check(_)) => EXIT_CHECK,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

/// Runs the CLI with the process arguments and returns the exit code.
pub fn main() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
