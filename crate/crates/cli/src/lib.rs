//! Command-line front end: data generation, training, architecture search,
//! descriptor extraction, probes, visualization and benchmarking.

pub mod commands;
pub mod config;
pub mod context;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Config, KEYS};

#[derive(Parser, Debug)]
#[command(name = "c3d", version, about = "Spatiotemporal 3D convolutional networks for video")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 makes every output bit-reproducible.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run directory for the resolved config, log and outputs [default: runs/<command>].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Inputs shared by commands that evaluate a trained model.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Run directory of a `train` run (holds config.txt and weights.c3dw).
    #[arg(long, value_name = "DIR")]
    pub model: PathBuf,
    /// VSET dataset [default: $C3D_DATA_DIR/motionblobs.vset].
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a MotionBlobs dataset.
    GenData {
        /// Output file [default: $C3D_DATA_DIR/motionblobs.vset, else <out>/motionblobs.vset].
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        videos_per_class: Option<usize>,
    },
    /// Train a network and save its weights.
    Train {
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
    },
    /// Train one family network per temporal depth and tabulate accuracy.
    ArchSearch {
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,7")]
        depths: Vec<usize>,
    },
    /// Per-layer and total parameter counts.
    CountParams {
        /// Preset name, or `family` for the configured family network.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Finite-difference check of every backward pass.
    Gradcheck,
    /// Write video descriptors as CSV and DESC.
    Extract {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        layer: Option<String>,
    },
    /// Clip-averaged video predictions.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        clips: Option<usize>,
    },
    /// Cross-validated linear SVM on video descriptors.
    ProbeSvm {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        layer: Option<String>,
    },
    /// SVM accuracy after PCA to several sizes.
    ProbePca {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        layer: Option<String>,
        /// Comma list of sizes; `full` keeps every component.
        #[arg(long)]
        dims: Option<String>,
    },
    /// Same/different pair classification with class-disjoint folds.
    ProbeSim {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Project strong activations back to pixels.
    Visualize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        layer: Option<String>,
        #[arg(long)]
        channel: Option<usize>,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Descriptor extraction throughput, including dataset I/O.
    Benchmark {
        /// Trained run directory; an untrained network is used when omitted.
        #[arg(long, value_name = "DIR")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        data: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Train { .. } => "train",
            Command::ArchSearch { .. } => "arch-search",
            Command::CountParams { .. } => "count-params",
            Command::Gradcheck => "gradcheck",
            Command::Extract { .. } => "extract",
            Command::Predict { .. } => "predict",
            Command::ProbeSvm { .. } => "probe-svm",
            Command::ProbePca { .. } => "probe-pca",
            Command::ProbeSim { .. } => "probe-sim",
            Command::Visualize { .. } => "visualize",
            Command::Benchmark { .. } => "benchmark",
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit
/// code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
