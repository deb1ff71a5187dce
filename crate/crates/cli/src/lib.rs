//! Operator commands behind the `drs` binary. Each command returns a JSON
//! report plus a short human summary; `main` decides where they go.

pub mod args;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use drs_core::eval::{
    chronological_split, classification_metrics, load_dataset, recall_at_top_k, roc_auc, simulate_gate,
    sweep_threshold, undersample_majority, Dataset, EvalError, EvalReport, GatePolicy, GateReport, LoadReport,
    SplitFractions, ThresholdChoice,
};
use drs_core::metrics::{fit_bucket_thresholds, BucketThresholds, ChangeMetrics, Metric};
use drs_core::predict::Predictor;
use drs_core::scoring::{BaselineModel, RemoteClient, ScoreError, Scorer, TrainOptions};
use serde::Serialize;
use serde_json::Value;

pub use args::{BackendArg, Cli, Command};
use args::{CalibrateArgs, EvaluateArgs, GateSimArgs, ScoreFileArgs, TrainArgs};

/// Recall@Top-k% values reported by `evaluate`.
pub const REPORTED_TOP_K: [u32; 3] = [5, 10, 30];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    /// The inputs were readable but the evaluation cannot proceed.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

fn eval_error(context: &str, e: EvalError) -> CliError {
    let msg = format!("{context}: {e}");
    match e {
        EvalError::Io(_) | EvalError::MissingColumn(_) | EvalError::EmptyDataset => CliError::Io(msg),
        EvalError::InvalidPolicy(_) | EvalError::InvalidRatio(_) | EvalError::InvalidFractions => CliError::Usage(msg),
        _ => CliError::Domain(msg),
    }
}

fn score_error(context: &str, e: ScoreError) -> CliError {
    let msg = format!("{context}: {e}");
    match e {
        ScoreError::InvalidConfig(_) => CliError::Usage(msg),
        _ => CliError::Domain(msg),
    }
}

pub struct Output {
    pub report: Value,
    pub summary: String,
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Calibrate(a) => cmd_calibrate(&a).map(|r| output(&r, r.summary())),
        Command::TrainBaseline(a) => cmd_train_baseline(&a).map(|r| output(&r, r.summary())),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|r| output(&r, r.summary())),
        Command::GateSim(a) => cmd_gate_sim(&a).map(|r| output(&r, r.summary())),
        Command::ScoreFile(a) => cmd_score_file(&a).map(|r| output(&r, r.summary())),
    }
}

fn output<T: Serialize>(report: &T, summary: String) -> Output {
    Output {
        report: serde_json::to_value(report).expect("reports serialize"),
        summary,
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Write `report` as pretty JSON when an output path was given.
fn write_report<T: Serialize>(out: Option<&PathBuf>, report: &T) -> Result<(), CliError> {
    match out {
        Some(path) => write_text(
            path,
            &(serde_json::to_string_pretty(report).expect("reports serialize") + "\n"),
        ),
        None => Ok(()),
    }
}

fn load(path: &Path) -> Result<LoadReport, CliError> {
    load_dataset(path).map_err(|e| eval_error("cannot load dataset", e))
}

fn load_calibration(path: &Path) -> Result<BucketThresholds, CliError> {
    BucketThresholds::from_calibration_str(&read_text(path)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn fit_calibration(train: &Dataset) -> Result<BucketThresholds, CliError> {
    fit_bucket_thresholds(&train.metric_samples())
        .map_err(|e| CliError::Domain(format!("cannot calibrate on the training split: {e}")))
}

/// The given calibration file, or one fitted on `train`.
fn calibration_or_fit(path: Option<&PathBuf>, train: &Dataset) -> Result<(BucketThresholds, String), CliError> {
    match path {
        Some(p) => Ok((load_calibration(p)?, p.display().to_string())),
        None => {
            tracing::info!("no calibration file given, fitting on the training split");
            Ok((fit_calibration(train)?, "train-split".into()))
        }
    }
}

fn load_model(path: &Path) -> Result<BaselineModel, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn scores_for(model: &BaselineModel, calibration: &BucketThresholds, ds: &Dataset) -> Vec<f64> {
    ds.rows
        .iter()
        .map(|r| model.predict(&calibration.bucketize(&r.metrics)))
        .collect()
}

fn class_counts(ds: &Dataset) -> ClassCounts {
    let buggy = ds.buggy_count();
    ClassCounts {
        clean: ds.len() - buggy,
        buggy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub clean: usize,
    pub buggy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrateReport {
    pub rows: usize,
    pub skipped: usize,
    pub train_rows: usize,
    pub cuts: BTreeMap<String, [f64; 4]>,
    pub out: String,
}

impl CalibrateReport {
    fn summary(&self) -> String {
        let mut s = format!("calibrated on {} training rows, wrote {}\n", self.train_rows, self.out);
        for m in Metric::ALL {
            let c = self.cuts[m.column()];
            s.push_str(&format!(
                "  {:<5} {:>10} {:>10} {:>10} {:>10}\n",
                m.column(),
                c[0],
                c[1],
                c[2],
                c[3]
            ));
        }
        s
    }
}

/// Fit bucket cut points on the training split and write the calibration file.
pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<CalibrateReport, CliError> {
    let loaded = load(&a.data.dataset)?;
    let split = chronological_split(&loaded.dataset, SplitFractions::default());
    let calibration = fit_calibration(&split.train)?;
    write_text(&a.out, &calibration.to_calibration_string())?;
    let cuts = Metric::ALL
        .iter()
        .map(|&m| {
            let c = calibration.cuts(m);
            (m.column().to_string(), [c.q20, c.q40, c.q60, c.q80])
        })
        .collect();
    Ok(CalibrateReport {
        rows: loaded.dataset.len(),
        skipped: loaded.skipped,
        train_rows: split.train.len(),
        cuts,
        out: a.out.display().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub rows: usize,
    pub skipped: usize,
    pub train_rows: usize,
    pub undersampled: ClassCounts,
    pub ratio: f64,
    pub seed: u64,
    pub calibration: String,
    pub scorer_id: String,
    pub out: String,
}

impl TrainReport {
    fn summary(&self) -> String {
        format!(
            "trained {} on {} clean + {} buggy rows (ratio {}, seed {}), wrote {}\n",
            self.scorer_id, self.undersampled.clean, self.undersampled.buggy, self.ratio, self.seed, self.out
        )
    }
}

fn train_model(train: &Dataset, calibration: &BucketThresholds) -> Result<BaselineModel, CliError> {
    let examples: Vec<_> = train
        .rows
        .iter()
        .map(|r| (calibration.bucketize(&r.metrics), r.buggy))
        .collect();
    BaselineModel::train(&examples, &TrainOptions::default()).map_err(|e| score_error("training failed", e))
}

/// Undersample the training split and fit the baseline on it.
pub fn cmd_train_baseline(a: &TrainArgs) -> Result<TrainReport, CliError> {
    let loaded = load(&a.data.dataset)?;
    let split = chronological_split(&loaded.dataset, SplitFractions::default());
    let (calibration, calibration_source) = calibration_or_fit(a.calibration.as_ref(), &split.train)?;
    let train = undersample_majority(&split.train, a.ratio, a.seed).map_err(|e| eval_error("undersampling", e))?;
    let model = train_model(&train, &calibration)?;
    write_text(
        &a.out,
        &(serde_json::to_string_pretty(&model).expect("model serializes") + "\n"),
    )?;
    Ok(TrainReport {
        rows: loaded.dataset.len(),
        skipped: loaded.skipped,
        train_rows: split.train.len(),
        undersampled: class_counts(&train),
        ratio: a.ratio,
        seed: a.seed,
        calibration: calibration_source,
        scorer_id: BaselineModel::SCORER_ID.into(),
        out: a.out.display().to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingInfo {
    pub undersampled: ClassCounts,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub rows: usize,
    pub skipped: usize,
    pub split: SplitCounts,
    /// Absent when a pre-trained model was loaded.
    pub training: Option<TrainingInfo>,
    pub calibration: String,
    pub scorer_id: String,
    pub validation: ThresholdChoice,
    pub test: EvalReport,
    /// Keyed by k.
    pub recall_at_top_k: BTreeMap<String, f64>,
    /// The test threshold is the one picked on validation.
    pub tau_frozen: bool,
}

impl EvaluateReport {
    fn summary(&self) -> String {
        let mut s = format!(
            "split {}/{}/{}, tau {:.4} (validation F1 {:.4})\n\
             test: precision {:.4} recall {:.4} F1 {:.4} accuracy {:.4} ROC-AUC {:.4}\n",
            self.split.train,
            self.split.valid,
            self.split.test,
            self.validation.tau,
            self.validation.f1,
            self.test.precision,
            self.test.recall,
            self.test.f1,
            self.test.accuracy,
            self.test.roc_auc.unwrap_or(f64::NAN),
        );
        for k in REPORTED_TOP_K {
            s.push_str(&format!(
                "  recall@top-{k}%: {:.4}\n",
                self.recall_at_top_k[&k.to_string()]
            ));
        }
        s
    }
}

fn dataset_model(backend: &BackendArg) -> Result<Option<BaselineModel>, CliError> {
    match backend {
        BackendArg::Builtin => Ok(None),
        BackendArg::Model(p) => load_model(p).map(Some),
        BackendArg::Remote(_) | BackendArg::Clm(_) => Err(CliError::Usage(
            "dataset rows carry metrics only; remote backends need diffs (use score-file)".into(),
        )),
    }
}

/// Chronological split, undersampling, training, validation sweep and a
/// single test evaluation at the frozen threshold.
pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<EvaluateReport, CliError> {
    let loaded = load(&a.data.dataset)?;
    let split = chronological_split(&loaded.dataset, SplitFractions::default());
    let (calibration, calibration_source) = calibration_or_fit(a.calibration.as_ref(), &split.train)?;
    let (model, training) = match dataset_model(&a.backend)? {
        Some(m) => (m, None),
        None => {
            let train =
                undersample_majority(&split.train, a.ratio, a.seed).map_err(|e| eval_error("undersampling", e))?;
            let info = TrainingInfo {
                undersampled: class_counts(&train),
                ratio: a.ratio,
                seed: a.seed,
            };
            (train_model(&train, &calibration)?, Some(info))
        }
    };

    let valid_labels = split.valid.labels();
    let valid_scores = scores_for(&model, &calibration, &split.valid);
    let choice = sweep_threshold(&valid_scores, &valid_labels).map_err(|e| eval_error("validation split", e))?;

    let test_labels = split.test.labels();
    let test_scores = scores_for(&model, &calibration, &split.test);
    let mut test =
        classification_metrics(&test_scores, &test_labels, choice.tau).map_err(|e| eval_error("test split", e))?;
    test.roc_auc = Some(roc_auc(&test_scores, &test_labels).map_err(|e| eval_error("test split", e))?);
    let mut recalls = BTreeMap::new();
    for k in REPORTED_TOP_K {
        let r = recall_at_top_k(&test_scores, &test_labels, k as f64).map_err(|e| eval_error("test split", e))?;
        recalls.insert(k.to_string(), r);
    }
    let tau_frozen = test.threshold == choice.tau;
    if !tau_frozen {
        return Err(CliError::Domain(format!(
            "test threshold {} differs from validation threshold {}",
            test.threshold, choice.tau
        )));
    }

    let report = EvaluateReport {
        rows: loaded.dataset.len(),
        skipped: loaded.skipped,
        split: SplitCounts {
            train: split.train.len(),
            valid: split.valid.len(),
            test: split.test.len(),
        },
        training,
        calibration: calibration_source,
        scorer_id: BaselineModel::SCORER_ID.into(),
        validation: choice,
        test,
        recall_at_top_k: recalls,
        tau_frozen,
    };
    write_report(a.out.as_ref(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSimReport {
    pub policy: GatePolicy,
    #[serde(flatten)]
    pub gate: GateReport,
    pub gated_fraction: f64,
}

impl GateSimReport {
    fn summary(&self) -> String {
        format!(
            "gated {} of {} commits ({:.1}%), capturing {} of {} buggy ({:.1}%)\n",
            self.gate.gated_count,
            self.gate.total,
            100.0 * self.gated_fraction,
            self.gate.buggy_gated,
            self.gate.buggy_total,
            100.0 * self.gate.captured_fraction
        )
    }
}

#[derive(serde::Deserialize)]
struct ScoreRow {
    score: f64,
    #[serde(alias = "label")]
    buggy: String,
}

/// Read a `score,buggy` CSV.
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<bool>), CliError> {
    let bad = |line: u64, msg: String| CliError::Io(format!("{}:{line}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in rdr.deserialize::<ScoreRow>().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| bad(line, e.to_string()))?;
        let label = match row.buggy.to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(bad(line, format!("label {other:?} is not 0/1"))),
        };
        scores.push(row.score);
        labels.push(label);
    }
    Ok((scores, labels))
}

/// Write a `score,buggy` CSV.
pub fn write_scores(path: &Path, scores: &[f64], labels: &[bool]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["score", "buggy"]).map_err(io)?;
    for (s, &y) in scores.iter().zip(labels) {
        w.write_record([s.to_string(), u8::from(y).to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cmd_gate_sim(a: &GateSimArgs) -> Result<GateSimReport, CliError> {
    let policy = match (a.top_percent, a.tau) {
        (Some(k), None) => GatePolicy::top_percent(k),
        (None, Some(t)) => GatePolicy::fixed_threshold(t),
        _ => return Err(CliError::Usage("give exactly one of --top-percent and --tau".into())),
    }
    .map_err(|e| eval_error("policy", e))?;

    let (scores, labels) = match (&a.scores, &a.dataset) {
        (Some(path), None) => read_scores(path)?,
        (None, Some(path)) => {
            let ds = load(path)?.dataset;
            let calibration = match &a.calibration {
                Some(p) => load_calibration(p)?,
                None => {
                    return Err(CliError::Usage("--dataset needs --calibration".into()));
                }
            };
            let model = dataset_model(&a.backend)?.unwrap_or_default();
            (scores_for(&model, &calibration, &ds), ds.labels())
        }
        _ => return Err(CliError::Usage("give exactly one of --scores and --dataset".into())),
    };
    let gate = simulate_gate(&scores, &labels, policy).map_err(|e| eval_error("gate simulation", e))?;
    let report = GateSimReport {
        policy,
        gated_fraction: gate.gated_fraction(),
        gate,
    };
    write_report(a.out.as_ref(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreFileReport {
    pub probability: f64,
    pub label: String,
    pub confidence: f64,
    pub threshold: f64,
    pub scorer_id: String,
    pub truncated: bool,
    pub unit_count: usize,
}

impl ScoreFileReport {
    fn summary(&self) -> String {
        format!(
            "{} (p = {:.4}, confidence {:.4}, threshold {})\n",
            self.label, self.probability, self.confidence, self.threshold
        )
    }
}

pub fn cmd_score_file(a: &ScoreFileArgs) -> Result<ScoreFileReport, CliError> {
    if !(0.0..=1.0).contains(&a.tau) {
        return Err(CliError::Usage(format!("--tau {} outside [0, 1]", a.tau)));
    }
    let diff = read_text(&a.diff)?;
    let message = match &a.message {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let supplied = match &a.metrics {
        Some(p) => {
            let map: BTreeMap<String, f64> =
                serde_json::from_str(&read_text(p)?).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            ChangeMetrics::from_map(&map).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ChangeMetrics::unknown(),
    };
    let remote = |url: &str| RemoteClient::new(url, 30_000, usize::MAX).map_err(|e| score_error("backend", e));
    let scorer = match &a.backend {
        BackendArg::Builtin => Scorer::Builtin(BaselineModel::untrained()),
        BackendArg::Model(p) => Scorer::Builtin(load_model(p)?),
        BackendArg::Remote(url) => Scorer::Remote(remote(url)?),
        BackendArg::Clm(url) => Scorer::Clm(remote(url)?),
    };
    let mut predictor = Predictor::new(scorer, a.tau);
    predictor.max_diff_bytes = usize::MAX;
    if let Some(p) = &a.calibration {
        predictor.calibration = Some(load_calibration(p)?);
    }

    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let prediction = rt
        .block_on(predictor.predict(&message, &diff, &supplied))
        .map_err(|e| CliError::Domain(format!("scoring failed: {e}")))?;
    let report = ScoreFileReport {
        probability: prediction.score.probability,
        label: prediction.score.label.as_str().into(),
        confidence: prediction.score.confidence,
        threshold: prediction.score.threshold,
        scorer_id: prediction.score.scorer_id,
        truncated: prediction.truncated,
        unit_count: prediction.unit_count,
    };
    write_report(a.out.as_ref(), &report)?;
    Ok(report)
}
