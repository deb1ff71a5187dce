use std::collections::BTreeMap;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScoreError;

/// Request body of the model service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemotePayload {
    pub diff: String,
    pub commit_message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<BTreeMap<String, f64>>,
}

/// Response body of the model service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteResponse {
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// HTTP client for a model service exposing `/seq-cls/*` and `/clm/*`.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    http: reqwest::Client,
    base_url: String,
    timeout_ms: u64,
    max_diff_bytes: usize,
}

enum Failure {
    Transient(ScoreError),
    Fatal(ScoreError),
}

impl RemoteClient {
    pub fn new(base_url: &str, timeout_ms: u64, max_diff_bytes: usize) -> Result<Self, ScoreError> {
        if timeout_ms == 0 || max_diff_bytes == 0 {
            return Err(ScoreError::InvalidConfig(
                "timeout_ms and max_diff_bytes must be positive".into(),
            ));
        }
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| ScoreError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
            timeout_ms,
            max_diff_bytes,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn check(&self, payload: &RemotePayload) -> Result<(), ScoreError> {
        if payload.diff.is_empty() && payload.commit_message.is_empty() {
            return Err(ScoreError::EmptyPayload);
        }
        if payload.diff.len() > self.max_diff_bytes {
            return Err(ScoreError::DiffTooLarge {
                size: payload.diff.len(),
                limit: self.max_diff_bytes,
            });
        }
        Ok(())
    }

    pub async fn predict(&self, payload: &RemotePayload) -> Result<f64, ScoreError> {
        self.check(payload)?;
        let body = self.post_with_retry("/seq-cls/predict", payload).await?;
        let resp: RemoteResponse =
            serde_json::from_str(&body).map_err(|e| ScoreError::MalformedBackendResponse(e.to_string()))?;
        checked_probability(resp.probability)
    }

    /// One backend call for all payloads; results follow request order.
    pub async fn predict_batch(&self, payloads: &[RemotePayload]) -> Result<Vec<f64>, ScoreError> {
        if payloads.is_empty() {
            return Ok(Vec::new());
        }
        for p in payloads {
            self.check(p)?;
        }
        let body = self.post_with_retry("/seq-cls/predict_batch", payloads).await?;
        let resp: Vec<RemoteResponse> =
            serde_json::from_str(&body).map_err(|e| ScoreError::MalformedBackendResponse(e.to_string()))?;
        if resp.len() != payloads.len() {
            return Err(ScoreError::MalformedBackendResponse(format!(
                "sent {} requests, received {} responses",
                payloads.len(),
                resp.len()
            )));
        }
        resp.into_iter().map(|r| checked_probability(r.probability)).collect()
    }

    /// Raw text from `/clm/predict`.
    pub async fn clm_text(&self, payload: &RemotePayload) -> Result<String, ScoreError> {
        self.check(payload)?;
        self.post_with_retry("/clm/predict", payload).await
    }

    /// First whitespace-delimited token of the CLM output.
    pub async fn clm_first_token(&self, payload: &RemotePayload) -> Result<String, ScoreError> {
        let text = self.clm_text(payload).await?;
        Ok(text.split_whitespace().next().unwrap_or_default().to_string())
    }

    /// Whether `GET /health` answers with a success status.
    pub async fn is_healthy(&self) -> bool {
        match self
            .http
            .get(format!("{}/health", self.base_url))
            .timeout(Duration::from_millis(self.timeout_ms.min(2_000)))
            .send()
            .await
        {
            Ok(resp) => resp.status().is_success(),
            Err(_) => false,
        }
    }

    async fn post_with_retry<T: Serialize + ?Sized>(&self, path: &str, body: &T) -> Result<String, ScoreError> {
        match self.post_once(path, body).await {
            Ok(text) => Ok(text),
            Err(Failure::Fatal(e)) => Err(e),
            Err(Failure::Transient(first)) => {
                let jitter = rand::rng().random_range(50..150);
                tracing::debug!(path, error = %first, jitter_ms = jitter, "retrying backend call");
                tokio::time::sleep(Duration::from_millis(jitter)).await;
                self.post_once(path, body).await.map_err(|f| match f {
                    Failure::Transient(e) | Failure::Fatal(e) => e,
                })
            }
        }
    }

    async fn post_once<T: Serialize + ?Sized>(&self, path: &str, body: &T) -> Result<String, Failure> {
        let resp = self
            .http
            .post(format!("{}{}", self.base_url, path))
            .json(body)
            .send()
            .await
            .map_err(|e| Failure::Transient(self.transport_error(&e)))?;
        let status = resp.status();
        let text = resp
            .text()
            .await
            .map_err(|e| Failure::Transient(self.transport_error(&e)))?;
        if status.is_success() {
            Ok(text)
        } else if status.is_server_error() || status.as_u16() == 429 {
            Err(Failure::Transient(ScoreError::BackendUnavailable(format!(
                "{path} returned {status}"
            ))))
        } else {
            Err(Failure::Fatal(ScoreError::BackendUnavailable(format!(
                "{path} returned {status}"
            ))))
        }
    }

    fn transport_error(&self, e: &reqwest::Error) -> ScoreError {
        if e.is_timeout() {
            ScoreError::BackendTimeout(self.timeout_ms)
        } else {
            ScoreError::BackendUnavailable(e.to_string())
        }
    }
}

fn checked_probability(p: f64) -> Result<f64, ScoreError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(ScoreError::MalformedBackendResponse(format!(
            "probability {p} outside [0, 1]"
        )))
    }
}
