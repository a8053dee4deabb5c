use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distpred::data::ToyKind;

mod commands;
mod config;
mod error;

use config::FileConfig;
use error::CliResult;

/// Distribution-free probabilistic regression with single-pass ensemble heads.
#[derive(Debug, Parser)]
#[command(name = "distpred", version)]
struct Cli {
    /// Flat key=value file supplying defaults for any flag; flags win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one of the synthetic toy datasets.
    GenToy(GenToyArgs),
    /// Write resampled 90/10 train/test splits as a fold file.
    MakeFolds(MakeFoldsArgs),
    /// Train a model and report held-out metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Emit per-row predictive distribution plot data.
    PredictDist(PredictDistArgs),
    /// Time single-pass inference and check the forward-pass count.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GenToyArgs {
    /// Task name
    #[arg(value_parser = parse_toy)]
    task: ToyKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

fn parse_toy(s: &str) -> Result<ToyKind, String> {
    s.parse().map_err(|e: distpred::Error| e.to_string())
}

#[derive(Debug, Args)]
struct MakeFoldsArgs {
    /// Number of rows to split.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Comma- or whitespace-delimited numeric table.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Target column: "last", a 0-based index, or a header name.
    #[arg(long, default_value = "last")]
    pub target: String,
}

#[derive(Debug, Args, Clone)]
pub struct ModelFlags {
    /// Ensemble width K.
    #[arg(long)]
    pub k: Option<usize>,
    /// Hidden layer widths, comma-separated.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Dropout rate on hidden layers during training.
    #[arg(long)]
    pub dropout: Option<f64>,
    /// relu or tanh
    #[arg(long)]
    pub activation: Option<String>,
    /// Train the Gaussian-likelihood head instead of the ensemble head.
    #[arg(long)]
    pub gaussian_baseline: bool,
}

#[derive(Debug, Args, Clone)]
pub struct TrainFlags {
    /// ADAM learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement before stopping; 0 disables.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Minibatch size.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct MetricFlags {
    /// Quantile intervals for QICE.
    #[arg(long)]
    pub m_bins: Option<usize>,
    /// Lower PICP quantile level, as a fraction.
    #[arg(long)]
    pub low_pct: Option<f64>,
    /// Upper PICP quantile level, as a fraction.
    #[arg(long)]
    pub high_pct: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub metrics: MetricFlags,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fold file (one line of test indices per fold) instead of a fresh 90/10 split.
    #[arg(long, value_name = "PATH")]
    pub folds: Option<PathBuf>,
    /// Which fold of --folds to train on.
    #[arg(long)]
    pub fold: Option<usize>,
    /// Checkpoint output path.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Per-epoch loss CSV; defaults to <out>.history.csv
    #[arg(long, value_name = "PATH")]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub metrics: MetricFlags,
    /// Pool T dropout-active passes per row.
    #[arg(long)]
    pub mcd_t: Option<usize>,
    /// Average metrics over consecutive batches of B rows.
    #[arg(long)]
    pub per_batch: Option<usize>,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictDistArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Rows to predict; the target column is ignored.
    #[arg(long, value_name = "PATH", conflicts_with = "x", required_unless_present = "x")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value = "last")]
    pub target: String,
    /// A single comma-separated feature row.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<String>,
    /// Interval levels, comma-separated.
    #[arg(long)]
    pub levels: Option<String>,
    /// Histogram bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Pool T dropout-active passes per row.
    #[arg(long)]
    pub mcd_t: Option<usize>,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write here instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Checkpoint to time; without it a fresh model is built from the model flags.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Input dimension for a fresh model.
    #[arg(long, default_value_t = 8)]
    pub input_dim: usize,
    /// Rows per timed repeat.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Number of timed repeats.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Falls back to DISTPRED_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::GenToy(a) => commands::gen_toy(a.task, a.n, file.seed(a.seed)?, &a.out),
        Command::MakeFolds(a) => commands::make_folds(a.n, a.count, file.seed(a.seed)?, &a.out),
        Command::Train(a) => commands::train(&a, &file),
        Command::Eval(a) => commands::eval(&a, &file),
        Command::PredictDist(a) => commands::predict_dist(&a, &file),
        Command::Bench(a) => commands::bench(&a, &file),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on its own usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("distpred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
