//! Risk scoring: the probability-to-label contract, the built-in baseline
//! scorer and the client for a remote model service.

mod baseline;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::StructuredText;
use crate::metrics::{BucketedMetrics, ChangeMetrics};

pub use baseline::{sigmoid, BaselineModel, TrainOptions, FEATURE_COUNT};
pub use remote::{RemoteClient, RemotePayload, RemoteResponse};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("backend timed out after {0} ms")]
    BackendTimeout(u64),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("malformed backend response: {0}")]
    MalformedBackendResponse(String),
    #[error("diff is {size} bytes, limit is {limit}")]
    DiffTooLarge { size: usize, limit: usize },
    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),
    #[error("invalid scorer configuration: {0}")]
    InvalidConfig(String),
    #[error("payload needs a non-empty diff or commit message")]
    EmptyPayload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Risky,
    Safe,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Risky => "risky",
            Label::Safe => "safe",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `p >= threshold` is risky.
pub fn label_for(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Risky
    } else {
        Label::Safe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScore {
    pub probability: f64,
    pub threshold: f64,
    pub label: Label,
    /// Probability of the predicted label.
    pub confidence: f64,
    pub scorer_id: String,
}

impl RiskScore {
    pub fn new(probability: f64, threshold: f64, scorer_id: impl Into<String>) -> Self {
        let label = label_for(probability, threshold);
        let confidence = match label {
            Label::Risky => probability,
            Label::Safe => 1.0 - probability,
        };
        Self {
            probability,
            threshold,
            label,
            confidence,
            scorer_id: scorer_id.into(),
        }
    }
}

/// Outcome of reading the first generated token of a causal LM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClmLabel {
    Risky,
    Safe,
    Unparseable,
}

/// `"1"` is risky, `"0"` is safe, anything else is unparseable.
pub fn clm_token_to_label(first_token: &str) -> ClmLabel {
    match first_token.trim() {
        "1" => ClmLabel::Risky,
        "0" => ClmLabel::Safe,
        _ => ClmLabel::Unparseable,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Builtin,
    /// Sequence-classification service answering `/seq-cls/predict`.
    Remote {
        base_url: String,
        timeout_ms: u64,
        max_diff_bytes: usize,
    },
    /// Causal LM service answering `/clm/predict`; the first generated token
    /// is read as the label.
    Clm {
        base_url: String,
        timeout_ms: u64,
        max_diff_bytes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerConfig {
    pub backend: BackendConfig,
    pub threshold: f64,
}

impl ScorerConfig {
    pub fn builtin(threshold: f64) -> Self {
        Self {
            backend: BackendConfig::Builtin,
            threshold,
        }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ScoreError::InvalidConfig(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        match &self.backend {
            BackendConfig::Builtin => Ok(()),
            BackendConfig::Remote {
                timeout_ms,
                max_diff_bytes,
                ..
            }
            | BackendConfig::Clm {
                timeout_ms,
                max_diff_bytes,
                ..
            } => {
                if *timeout_ms == 0 {
                    Err(ScoreError::InvalidConfig("timeout_ms must be > 0".into()))
                } else if *max_diff_bytes == 0 {
                    Err(ScoreError::InvalidConfig("max_diff_bytes must be > 0".into()))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Everything a backend may look at for one commit.
#[derive(Debug, Clone, Copy)]
pub struct ScoringInput<'a> {
    pub structured: &'a StructuredText,
    pub buckets: &'a BucketedMetrics,
    pub raw_diff: &'a str,
    pub commit_message: &'a str,
    pub metrics: &'a ChangeMetrics,
}

impl<'a> ScoringInput<'a> {
    pub fn payload(&self) -> RemotePayload {
        let metrics = self.metrics.to_map();
        RemotePayload {
            diff: self.raw_diff.to_string(),
            commit_message: self.commit_message.to_string(),
            metrics: (!metrics.is_empty()).then_some(metrics),
        }
    }
}

/// A configured scoring backend.
#[derive(Debug, Clone)]
pub enum Scorer {
    Builtin(BaselineModel),
    Remote(RemoteClient),
    Clm(RemoteClient),
}

impl Scorer {
    /// Build the backend named by `cfg`. `model` is used for the builtin
    /// backend only.
    pub fn from_config(cfg: &ScorerConfig, model: BaselineModel) -> Result<Self, ScoreError> {
        cfg.validate()?;
        Ok(match &cfg.backend {
            BackendConfig::Builtin => Scorer::Builtin(model),
            BackendConfig::Remote {
                base_url,
                timeout_ms,
                max_diff_bytes,
            } => Scorer::Remote(RemoteClient::new(base_url, *timeout_ms, *max_diff_bytes)?),
            BackendConfig::Clm {
                base_url,
                timeout_ms,
                max_diff_bytes,
            } => Scorer::Clm(RemoteClient::new(base_url, *timeout_ms, *max_diff_bytes)?),
        })
    }

    pub fn id(&self) -> String {
        match self {
            Scorer::Builtin(_) => BaselineModel::SCORER_ID.to_string(),
            Scorer::Remote(c) => format!("remote-seq-cls@{}", c.base_url()),
            Scorer::Clm(c) => format!("remote-clm@{}", c.base_url()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Scorer::Builtin(_) => "builtin",
            Scorer::Remote(_) => "remote",
            Scorer::Clm(_) => "clm",
        }
    }

    pub async fn probability(&self, input: &ScoringInput<'_>) -> Result<f64, ScoreError> {
        match self {
            Scorer::Builtin(model) => Ok(model.predict(input.buckets)),
            Scorer::Remote(client) => client.predict(&input.payload()).await,
            Scorer::Clm(client) => match clm_token_to_label(&client.clm_first_token(&input.payload()).await?) {
                ClmLabel::Risky => Ok(1.0),
                ClmLabel::Safe => Ok(0.0),
                ClmLabel::Unparseable => Err(ScoreError::MalformedBackendResponse(
                    "first generated token is neither 0 nor 1".into(),
                )),
            },
        }
    }

    /// Probabilities for several inputs, index-aligned with `inputs`.
    pub async fn probabilities(&self, inputs: &[ScoringInput<'_>]) -> Result<Vec<f64>, ScoreError> {
        match self {
            Scorer::Builtin(model) => Ok(inputs.iter().map(|i| model.predict(i.buckets)).collect()),
            Scorer::Remote(client) => {
                let payloads: Vec<RemotePayload> = inputs.iter().map(ScoringInput::payload).collect();
                client.predict_batch(&payloads).await
            }
            Scorer::Clm(_) => {
                let mut out = Vec::with_capacity(inputs.len());
                for input in inputs {
                    out.push(self.probability(input).await?);
                }
                Ok(out)
            }
        }
    }

    pub async fn score(&self, input: &ScoringInput<'_>, threshold: f64) -> Result<RiskScore, ScoreError> {
        let p = self.probability(input).await?;
        Ok(RiskScore::new(p, threshold, self.id()))
    }
}
