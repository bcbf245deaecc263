use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use susnet_core::{Metric, NetworkKind, NullModel};

#[derive(Debug, Parser, Serialize)]
#[command(name = "susnet", version, about = "Susceptibility, homophily and friendship-paradox analysis of interaction logs")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "SUSNET_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "SUSNET_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Abort on the first malformed input record.
    #[arg(long, global = true, env = "SUSNET_STRICT")]
    pub strict: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true, env = "SUSNET_VERBOSE")]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Keep URL-sharing events and select target users.
    Ingest(IngestArgs),
    /// Compute IAR and SAR for every target user.
    Score(ScoreArgs),
    /// Build a reciprocal friendship network and node features.
    Network(NetworkArgs),
    /// Homophily and friendship-paradox statistics for one metric.
    Analyze(AnalyzeArgs),
    /// Randomized baselines for the analyze statistics.
    Null(NullArgs),
    /// Predict a metric from friends' scores and user features.
    Predict(PredictArgs),
    /// Generate a synthetic corpus from a JSON config.
    Synth(SynthArgs),
    /// Summary table across analyze reports.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Score(_) => "score",
            Command::Network(_) => "network",
            Command::Analyze(_) => "analyze",
            Command::Null(_) => "null",
            Command::Predict(_) => "predict",
            Command::Synth(_) => "synth",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Interaction,
    Retweet,
    Mention,
}

impl From<KindArg> for NetworkKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Interaction => NetworkKind::Interaction,
            KindArg::Retweet => NetworkKind::Retweet,
            KindArg::Mention => NetworkKind::Mention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Iar,
    Sar,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Iar => Metric::Iar,
            MetricArg::Sar => Metric::Sar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NullModelArg {
    Swap,
    Reassign,
}

impl From<NullModelArg> for NullModel {
    fn from(m: NullModelArg) -> Self {
        match m {
            NullModelArg::Swap => NullModel::EdgeSwap,
            NullModelArg::Reassign => NullModel::NeighborReassign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Linear,
    Forest,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// Line-delimited JSON event log.
    #[arg(long, env = "SUSNET_EVENTS")]
    pub events: PathBuf,
    /// Minimum URL shares for a target user.
    #[arg(long, env = "SUSNET_THRESHOLD", default_value_t = 10)]
    pub threshold: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long, env = "SUSNET_EVENTS")]
    pub events: PathBuf,
    /// Line-delimited JSON user metadata.
    #[arg(long, env = "SUSNET_META")]
    pub meta: Option<PathBuf>,
    #[arg(long, env = "SUSNET_THRESHOLD", default_value_t = 10)]
    pub threshold: usize,
    /// Adoptions in the first days of the window are not counted.
    #[arg(long, env = "SUSNET_BUFFER_DAYS", default_value_t = 60)]
    pub buffer_days: i64,
    /// Window sidecar JSON with `start` and `end`.
    #[arg(long, env = "SUSNET_WINDOW")]
    pub window: Option<PathBuf>,
    #[arg(long, env = "SUSNET_WINDOW_START", allow_hyphen_values = true)]
    pub window_start: Option<i64>,
    #[arg(long, env = "SUSNET_WINDOW_END", allow_hyphen_values = true)]
    pub window_end: Option<i64>,
}

#[derive(Debug, Args, Serialize)]
pub struct NetworkArgs {
    #[arg(long, env = "SUSNET_EVENTS")]
    pub events: PathBuf,
    #[arg(long, value_enum, env = "SUSNET_KIND", default_value = "interaction")]
    pub kind: KindArg,
    /// Minimum URL shares for a target user (default 10).
    #[arg(long, env = "SUSNET_THRESHOLD", conflicts_with = "targets")]
    pub threshold: Option<usize>,
    /// File with one target user id per line.
    #[arg(long, env = "SUSNET_TARGETS")]
    pub targets: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NetworkInput {
    /// Edge list written by `network`.
    #[arg(long, env = "SUSNET_NETWORK")]
    pub network: PathBuf,
    #[arg(long, value_enum, env = "SUSNET_KIND", default_value = "interaction")]
    pub kind: KindArg,
    /// Score table written by `score`.
    #[arg(long, env = "SUSNET_SCORES")]
    pub scores: PathBuf,
    #[arg(long, value_enum, env = "SUSNET_METRIC")]
    pub metric: MetricArg,
    /// Name used in reports (defaults to the network kind).
    #[arg(long, env = "SUSNET_LABEL")]
    pub label: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: NetworkInput,
    /// Width of the score bins of the paradox grid.
    #[arg(long, env = "SUSNET_GRID_S_WIDTH", default_value_t = 0.05)]
    pub grid_s_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct NullArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: NetworkInput,
    #[arg(long, value_enum, env = "SUSNET_MODEL")]
    pub model: NullModelArg,
    #[arg(long, env = "SUSNET_REPS", default_value_t = 100)]
    pub reps: usize,
    /// Attempted swaps per edge.
    #[arg(long, env = "SUSNET_SWAP_MULT", default_value_t = 10)]
    pub swap_mult: usize,
    /// Analyze report to extend with this baseline.
    #[arg(long, env = "SUSNET_REPORT")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: NetworkInput,
    #[arg(long, value_enum, env = "SUSNET_MODEL")]
    pub model: ModelArg,
    /// Tune forest parameters by cross-validated random search.
    #[arg(long, env = "SUSNET_SEARCH")]
    pub search: bool,
    #[arg(long, env = "SUSNET_SEARCH_SETTINGS", default_value_t = 100)]
    pub search_settings: usize,
    #[arg(long, env = "SUSNET_FOLDS", default_value_t = 5)]
    pub folds: usize,
    #[arg(long, env = "SUSNET_TEST_FRAC", default_value_t = 0.2)]
    pub test_frac: f64,
    /// Shuffles per feature for permutation importance.
    #[arg(long, env = "SUSNET_SHUFFLES", default_value_t = 5)]
    pub shuffles: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// JSON synthesis config.
    #[arg(long, env = "SUSNET_CONFIG")]
    pub config: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Analyze reports to tabulate, in row order.
    #[arg(long, env = "SUSNET_REPORTS", num_args = 1.., value_delimiter = ',', required = true)]
    pub reports: Vec<PathBuf>,
}
