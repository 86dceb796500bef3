mod commands;
mod config;
mod exit;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Colonoscopy temporal segmentation: synthesize, train, evaluate, predict.
#[derive(Debug, Parser)]
#[command(name = "colontcn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Split {
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset: features, annotations and a manifest.
    Synth {
        /// Synthetic spec (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, short)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one fold and write checkpoints, history and a validation report.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Train and test every fold.
    Cv {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Score a checkpoint on a manifest or one split of a fold.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Fold document; needed with --fold.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-frame labels for feature files.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write class probabilities.
        #[arg(long)]
        probs: bool,
        #[arg(required = true)]
        features: Vec<PathBuf>,
    },
    /// Parameter count, receptive field and GFLOPs of a model.
    Profile {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the number of levels.
        #[arg(long)]
        levels: Option<usize>,
        /// One convolution per block, no residual.
        #[arg(long)]
        single_conv: bool,
        /// Sequence lengths for the GFLOPs column.
        #[arg(long = "frames")]
        frames: Vec<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Draw ground truth and predictions as an SVG timeline.
    Render {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long = "pred")]
        preds: Vec<PathBuf>,
        /// Video to draw from multi-video annotation files.
        #[arg(long)]
        video: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a fold document, optionally against a manifest.
    FoldsValidate {
        #[arg(long)]
        folds: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    fold: Option<usize>,
}

impl From<OverrideArgs> for config::Overrides {
    fn from(a: OverrideArgs) -> Self {
        Self { seed: a.seed, out: a.out, manifest: a.manifest, fold: a.fold }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { config, n, out, seed } => commands::synth(config.as_deref(), n, &out, seed),
        Command::Train { config, overrides } => commands::train(config.as_deref(), &overrides.into()),
        Command::Cv { config, overrides } => commands::cv(config.as_deref(), &overrides.into()),
        Command::Eval { checkpoint, manifest, folds, fold, split, out } => {
            commands::eval(&checkpoint, &manifest, folds.as_deref(), fold, split, out.as_deref())
        }
        Command::Predict { checkpoint, out, probs, features } => commands::predict(&checkpoint, &out, probs, &features),
        Command::Profile { config, levels, single_conv, frames, json } => {
            commands::profile(config.as_deref(), levels, single_conv, &frames, json)
        }
        Command::Render { gt, preds, video, out } => commands::render(&gt, &preds, video.as_deref(), &out),
        Command::FoldsValidate { folds, manifest } => commands::folds_validate(&folds, manifest.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e))
        }
    }
}
