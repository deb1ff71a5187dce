use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "drs", version, about = "Diff risk scoring tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit metric bucket cut points on the training split.
    Calibrate(CalibrateArgs),
    /// Train the built-in logistic baseline on the undersampled training split.
    TrainBaseline(TrainArgs),
    /// Split, train, pick a threshold on validation and report test metrics.
    Evaluate(EvaluateArgs),
    /// Simulate a gating policy over a score set.
    GateSim(GateSimArgs),
    /// Score one diff file.
    ScoreFile(ScoreFileArgs),
}

/// `builtin`, a model JSON written by `train-baseline`, or a service URL
/// (`http://…` for sequence classification, `clm+http://…` for a causal LM).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendArg {
    Builtin,
    Model(PathBuf),
    Remote(String),
    Clm(String),
}

impl FromStr for BackendArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err("backend must not be empty".into());
        }
        Ok(if s == "builtin" {
            BackendArg::Builtin
        } else if let Some(url) = s.strip_prefix("clm+") {
            BackendArg::Clm(url.to_string())
        } else if s.starts_with("http://") || s.starts_with("https://") {
            BackendArg::Remote(s.to_string())
        } else {
            BackendArg::Model(PathBuf::from(s))
        })
    }
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Where to write the calibration file.
    #[arg(long)]
    pub out: PathBuf,
    /// Accepted for uniformity; calibration is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Calibration file. Fitted on the training split when absent.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Fraction of the majority class kept when undersampling.
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// `builtin` trains a fresh baseline; a model path is used as is.
    #[arg(long, default_value = "builtin")]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("policy").required(true).args(["top_percent", "tau"])))]
#[command(group(clap::ArgGroup::new("source").required(true).args(["scores", "dataset"])))]
pub struct GateSimArgs {
    /// CSV with `score` and `buggy` columns.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Dataset CSV scored with `--backend`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value = "builtin", requires = "dataset")]
    pub backend: BackendArg,
    /// Gate the k% highest-scored commits.
    #[arg(long)]
    pub top_percent: Option<f64>,
    /// Gate commits scoring at least tau.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreFileArgs {
    /// Unified diff to score.
    #[arg(long)]
    pub diff: PathBuf,
    /// File holding the commit message.
    #[arg(long)]
    pub message: Option<PathBuf>,
    /// JSON object of known metric values.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value = "builtin")]
    pub backend: BackendArg,
    /// Decision threshold.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
