use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use caprouter::training::Stage1Mode;

#[derive(Debug, Parser)]
#[command(
    name = "caprouter",
    version,
    about = "Train and evaluate a capability-aware retriever router",
    allow_negative_numbers = true
)]
pub struct Cli {
    /// JSON config with optional `sim`, `train`, `model` and `paths` sections.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for both the simulator and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for files whose path is not configured.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated world (world.json, queries.jsonl).
    GenSim,
    /// Judge and generate every (train query, retriever) pair (supervision.jsonl).
    Supervise,
    /// Contrastive encoder training; writes the stage-1 checkpoint.
    TrainStage1,
    /// Fusion training on frozen encoders; writes the final checkpoint.
    TrainStage2,
    /// Route every query of a queries file (decisions.jsonl).
    Route,
    /// Compare the router with the baselines on the test split (report.json).
    Eval,
    /// Routing latency of a checkpoint (bench.json).
    Bench(BenchArgs),
    /// Finite-difference check of every analytic gradient (gradcheck.json).
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Benchmark a freshly initialized model instead of the checkpoint.
    #[arg(long)]
    pub fresh: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Number of random instances.
    #[arg(long, default_value_t = 20)]
    pub instances: usize,
}

fn parse_stage1_mode(s: &str) -> Result<Stage1Mode, String> {
    match s {
        "joint" => Ok(Stage1Mode::Joint),
        "alternating" => Ok(Stage1Mode::Alternating),
        _ => Err(format!("expected joint or alternating, got {s}")),
    }
}

/// Per-field overrides, named exactly as the config fields.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// InfoNCE temperature.
    #[arg(long, global = true, help_heading = "Training")]
    pub tau: Option<f64>,
    /// Positives per contrast set.
    #[arg(long, global = true, help_heading = "Training")]
    pub k: Option<usize>,
    /// Weight of F1 in the utility score.
    #[arg(long, global = true, help_heading = "Training")]
    pub beta: Option<f64>,
    /// Weight of the judge score in the utility score.
    #[arg(long, global = true, help_heading = "Training")]
    pub gamma: Option<f64>,
    /// Weight of the fused-embedding regularizer.
    #[arg(long = "lambda_reg", global = true, help_heading = "Training")]
    pub lambda_reg: Option<f64>,
    /// Adam learning rate.
    #[arg(long, global = true, help_heading = "Training")]
    pub lr: Option<f64>,
    /// Epochs per training stage.
    #[arg(long, global = true, help_heading = "Training")]
    pub epochs: Option<usize>,
    /// Queries per minibatch.
    #[arg(long = "batch_size", global = true, help_heading = "Training")]
    pub batch_size: Option<usize>,
    /// Fraction of training queries held out for validation.
    #[arg(long = "val_ratio", global = true, help_heading = "Training")]
    pub val_ratio: Option<f64>,
    /// joint or alternating.
    #[arg(long = "stage1_mode", global = true, value_parser = parse_stage1_mode, help_heading = "Training")]
    pub stage1_mode: Option<Stage1Mode>,
    /// Logit scale of the stage-2 classifier.
    #[arg(long = "sim_scale", global = true, help_heading = "Training")]
    pub sim_scale: Option<f64>,

    /// Noise on latent retrieval quality.
    #[arg(long = "noise_sd", global = true, help_heading = "Simulator")]
    pub noise_sd: Option<f64>,
    /// Slope of the correctness curve.
    #[arg(long = "correctness_slope", global = true, help_heading = "Simulator")]
    pub correctness_slope: Option<f64>,
    /// Quality at which correctness is one half.
    #[arg(long = "correctness_threshold", global = true, help_heading = "Simulator")]
    pub correctness_threshold: Option<f64>,
    /// Training queries.
    #[arg(long = "n_train", global = true, help_heading = "Simulator")]
    pub n_train: Option<usize>,
    /// Test queries.
    #[arg(long = "n_test", global = true, help_heading = "Simulator")]
    pub n_test: Option<usize>,

    /// Embedding width.
    #[arg(long, global = true, help_heading = "Model")]
    pub d: Option<usize>,
    /// Attention heads.
    #[arg(long, global = true, help_heading = "Model")]
    pub heads: Option<usize>,
    /// Hashed feature width.
    #[arg(long = "d_feat", global = true, help_heading = "Model")]
    pub d_feat: Option<usize>,

    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub world: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub queries: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub supervision: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub stage1: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub decisions: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub report: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH", help_heading = "Files")]
    pub bench: Option<PathBuf>,
}
