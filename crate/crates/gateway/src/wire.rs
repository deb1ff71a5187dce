//! JSON bodies exchanged with gateway clients.

use std::collections::BTreeMap;

use drs_core::predict::Prediction;
use drs_core::scoring::{Label, RemotePayload};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub diff: String,
    pub commit_message: String,
    /// Known metric values keyed by column name (`la`, `ndev`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<BTreeMap<String, f64>>,
}

impl PredictRequest {
    pub fn new(commit_message: impl Into<String>, diff: impl Into<String>) -> Self {
        Self {
            diff: diff.into(),
            commit_message: commit_message.into(),
            metrics: None,
        }
    }

    pub fn payload(&self) -> RemotePayload {
        RemotePayload {
            diff: self.diff.clone(),
            commit_message: self.commit_message.clone(),
            metrics: self.metrics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub probability: f64,
    pub label: Label,
    pub confidence: f64,
    pub threshold: f64,
    pub scorer_id: String,
    pub truncated: bool,
    /// Resolved commit for lookups by sha.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha: Option<String>,
}

impl From<Prediction> for PredictResponse {
    fn from(p: Prediction) -> Self {
        Self {
            probability: p.score.probability,
            label: p.score.label,
            confidence: p.score.confidence,
            threshold: p.score.threshold,
            scorer_id: p.score.scorer_id,
            truncated: p.truncated,
            sha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShaRequest {
    pub owner_repo: String,
    pub commit_sha: String,
}

impl ShaRequest {
    /// `owner/name` with exactly one slash and a 7 to 40 digit hex sha.
    pub fn validate(&self) -> Result<(&str, &str), String> {
        let (owner, repo) = self
            .owner_repo
            .split_once('/')
            .ok_or_else(|| format!("owner_repo {:?} must look like owner/name", self.owner_repo))?;
        let name_ok = |s: &str| {
            !s.is_empty()
                && s.chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        };
        if !name_ok(owner) || !name_ok(repo) {
            return Err(format!("owner_repo {:?} must look like owner/name", self.owner_repo));
        }
        let sha = self.commit_sha.as_str();
        if !(7..=40).contains(&sha.len()) || !sha.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(format!("commit_sha {sha:?} must be 7 to 40 hex digits"));
        }
        Ok((owner, repo))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after: Option<u64>,
}

/// One element of a batch response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchSlot {
    Ok(PredictResponse),
    Err(ErrorBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub version: String,
    /// Scorer id, or `unavailable` when a remote backend does not answer.
    pub backend: String,
    pub explain_enabled: bool,
}
