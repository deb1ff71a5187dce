//! Dataset handling, chronological splitting, undersampling, threshold
//! calibration, classification metrics and gating simulation.

mod classify;
mod dataset;
mod gate;
mod split;

use thiserror::Error;

pub use classify::{classification_metrics, roc_auc, sweep_threshold, ConfusionCounts, EvalReport, ThresholdChoice};
pub use dataset::{load_dataset, read_dataset, write_dataset, Dataset, LabeledCommit, LoadReport, DATASET_COLUMNS};
pub use gate::{recall_at_top_k, simulate_gate, top_k_count, GatePolicy, GateReport};
pub use split::{chronological_split, undersample_majority, Split, SplitFractions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("input needs at least one positive and one negative example")]
    SingleClassInput,
    #[error("score at index {0} is not finite")]
    NonFiniteScore(usize),
    #[error("invalid gate policy: {0}")]
    InvalidPolicy(String),
    #[error("sampling ratio {0} outside (0, 1]")]
    InvalidRatio(f64),
    #[error("split fractions must be non-negative and sum to 1")]
    InvalidFractions,
    #[error("dataset is missing column {0:?}")]
    MissingColumn(String),
    #[error("dataset has no usable rows")]
    EmptyDataset,
    #[error("{0}")]
    Io(String),
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    Ok(())
}
