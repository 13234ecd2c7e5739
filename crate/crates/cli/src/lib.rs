//! The `vehreid` command line.
//!
//! [`run`] parses arguments, dispatches to a subcommand and maps the outcome
//! to an exit code: 0 on success, 1 when a command fails on its inputs, 2 on
//! usage errors.

mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use output::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "vehreid", version, about = "Vehicle make/model and color classification and attribute re-identification")]
pub struct Cli {
    /// Seed for every random choice (generation, splits, initialization, shuffling).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic vehicle dataset with its manifest.
    Synth(SynthArgs),
    /// Blur and downscale images to simulate poor capture quality.
    Degrade(DegradeArgs),
    /// Stratified train/test split of a manifest.
    Split(SplitArgs),
    /// Train a make/model or color network.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of one checkpoint.
    Eval(EvalArgs),
    /// Accuracy of two make/model networks and of their fused scores.
    FuseEval(FuseEvalArgs),
    /// Classify one image.
    Classify(ClassifyArgs),
    /// Classify a set of images into a searchable index.
    Index(IndexArgs),
    /// Search an index by predicted make/model and color.
    Query(QueryArgs),
    /// Plot class centroids and descriptors on the unit sphere (SVG).
    PlotCentroids(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives manifest.jsonl and images/.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of shape classes.
    #[arg(long, default_value_t = 12)]
    pub classes: usize,
    /// Images per (class, color, view).
    #[arg(long, default_value_t = 1)]
    pub per: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Comma-separated palette names; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub colors: Vec<String>,
    /// Comma-separated views (front, rear, side, front-quarter, rear-quarter).
    #[arg(long, value_delimiter = ',', default_value = "front,side,rear")]
    pub views: Vec<String>,
}

#[derive(Debug, Args)]
pub struct DegradeSettings {
    /// Gaussian blur sigma in pixels.
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    /// Downscale factor.
    #[arg(long, default_value_t = 4.0)]
    pub factor: f64,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["manifest", "image"]))]
pub struct DegradeArgs {
    /// Degrade every record of a manifest.
    #[arg(long, requires = "out")]
    pub manifest: Option<PathBuf>,
    /// Output directory for manifest mode.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also copy the original records into the output manifest.
    #[arg(long)]
    pub keep_originals: bool,
    /// Degrade a single image.
    #[arg(long, requires = "output")]
    pub image: Option<PathBuf>,
    /// Output file for single-image mode.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub settings: DegradeSettings,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    MakeModel,
    Color,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Residual,
    /// Inception with z-normalization and ELU after every convolution.
    Inception,
    /// Inception with plain convolutions and ReLU.
    InceptionOriginal,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, value_enum, default_value_t = ArchArg::Residual)]
    pub arch: ArchArg,
    /// Architecture description in TOML; overrides --arch.
    #[arg(long)]
    pub arch_file: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-step loss trace (CSV) to write.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Confusion matrix CSV to write.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FusionWeights {
    /// Weight of the first make/model network.
    #[arg(long, default_value_t = 0.5)]
    pub w1: f64,
    /// Weight of the second make/model network.
    #[arg(long, default_value_t = 0.5)]
    pub w2: f64,
}

#[derive(Debug, Args)]
pub struct FuseEvalArgs {
    #[arg(long)]
    pub net1: PathBuf,
    #[arg(long)]
    pub net2: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub weights: FusionWeights,
    /// Full report (JSON) to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Models {
    /// Make/model checkpoint; give twice to fuse two networks.
    #[arg(long = "makemodel", required = true, num_args = 1)]
    pub makemodel: Vec<PathBuf>,
    /// Color checkpoint.
    #[arg(long)]
    pub color: PathBuf,
    #[command(flatten)]
    pub weights: FusionWeights,
    /// Make/model predictions kept per image.
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub models: Models,
    #[arg(long)]
    pub image: PathBuf,
    /// Region as x,y,width,height; whole image when absent.
    #[arg(long)]
    pub bbox: Option<String>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("inputs").required(true).args(["manifest", "images"]))]
pub struct IndexArgs {
    #[command(flatten)]
    pub models: Models,
    /// Index every record of a manifest (regions honored).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Index every PNG in a directory.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Accepted shape class id; repeatable.
    #[arg(long = "classid")]
    pub classids: Vec<usize>,
    #[arg(long)]
    pub make: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Accepted color name; repeatable or comma-separated.
    #[arg(long = "color", value_delimiter = ',')]
    pub colors: Vec<String>,
    #[arg(long)]
    pub min_shape_score: Option<f64>,
    #[arg(long)]
    pub min_color_score: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Re-rank matches by descriptor cosine to this probe image.
    #[arg(long, requires = "makemodel")]
    pub by_descriptor: Option<PathBuf>,
    /// Make/model checkpoint computing the probe descriptor.
    #[arg(long)]
    pub makemodel: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Descriptors drawn per class.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

/// A failed command.
#[derive(Debug)]
pub enum CliError {
    /// Arguments are well-formed for the parser but not usable together.
    Usage(String),
    Domain(vehreid_core::Error),
    Output(std::io::Error),
}

impl From<vehreid_core::Error> for CliError {
    fn from(e: vehreid_core::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Output(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Output(e) => write!(f, "cannot write output: {e}"),
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code();
        }
    };
    match commands::dispatch(&cli) {
        Ok(table) => match table.write(cli.format, out) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(err, "vehreid: {}", CliError::Output(e));
                1
            }
        },
        Err(e) => {
            let _ = writeln!(err, "vehreid: {e}");
            if let CliError::Usage(_) = e {
                let _ = writeln!(err, "\nFor more information, try '--help'.");
            }
            e.exit_code()
        }
    }
}
