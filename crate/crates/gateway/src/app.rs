use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use drs_core::metrics::{BucketThresholds, ChangeMetrics};
use drs_core::predict::{PredictError, Predictor};
use drs_core::scoring::{BaselineModel, RemoteClient, Scorer};
use serde::de::DeserializeOwned;
use serde_json::Value;
use thiserror::Error;

use crate::config::GatewayConfig;
use crate::error::ApiError;
use crate::hosting::{GitHubClient, HostedCommit, HostingClient};
use crate::wire::{BatchSlot, HealthResponse, PredictRequest, PredictResponse, ShaRequest};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("reading {path}: {reason}")]
    File { path: String, reason: String },
    #[error("{0}")]
    Setup(String),
}

struct Inner {
    predictor: Predictor,
    hosting: Option<Arc<dyn HostingClient>>,
    clm: Option<RemoteClient>,
    explain_enabled: bool,
    batch_cap: usize,
    next_request_id: AtomicU64,
}

/// Shared, immutable gateway state.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(
        predictor: Predictor,
        hosting: Option<Arc<dyn HostingClient>>,
        clm: Option<RemoteClient>,
        explain_enabled: bool,
        batch_cap: usize,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                predictor,
                hosting,
                clm,
                explain_enabled,
                batch_cap,
                next_request_id: AtomicU64::new(1),
            }),
        }
    }

    /// Load calibration and model files and build the configured clients.
    pub fn from_config(cfg: &GatewayConfig) -> Result<Self, StartupError> {
        let read = |path: &std::path::Path| {
            std::fs::read_to_string(path).map_err(|e| StartupError::File {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        };
        let calibration = match &cfg.calibration_path {
            Some(path) => {
                Some(
                    BucketThresholds::from_calibration_str(&read(path)?).map_err(|e| StartupError::File {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?,
                )
            }
            None => {
                tracing::warn!("no calibration file configured; every metric buckets to UNKNOWN");
                None
            }
        };
        let model = match &cfg.baseline_model_path {
            Some(path) => serde_json::from_str::<BaselineModel>(&read(path)?).map_err(|e| StartupError::File {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?,
            None => BaselineModel::untrained(),
        };
        let scorer = Scorer::from_config(&cfg.scorer, model).map_err(|e| StartupError::Setup(e.to_string()))?;
        if let Scorer::Builtin(m) = &scorer {
            if !m.is_trained() {
                tracing::warn!("builtin scorer has no trained model; every probability is 0.5");
            }
        }
        let mut predictor = Predictor::new(scorer, cfg.scorer.threshold);
        predictor.calibration = calibration;
        predictor.budget = cfg.max_seq_units;
        predictor.rule = cfg.counting_rule;
        predictor.max_diff_bytes = cfg.max_diff_bytes;

        let hosting: Option<Arc<dyn HostingClient>> = match &cfg.github_token {
            Some(token) => Some(Arc::new(
                GitHubClient::new(&cfg.github_api_url, token, cfg.timeout_ms)
                    .map_err(|e| StartupError::Setup(e.to_string()))?,
            )),
            None => None,
        };
        let clm = match &cfg.clm_url {
            Some(url) => Some(
                RemoteClient::new(url, cfg.timeout_ms, cfg.max_diff_bytes)
                    .map_err(|e| StartupError::Setup(e.to_string()))?,
            ),
            None => None,
        };
        Ok(Self::new(predictor, hosting, clm, cfg.explain_enabled, cfg.batch_cap))
    }

    pub fn predictor(&self) -> &Predictor {
        &self.inner.predictor
    }

    async fn predict_one(&self, req: &PredictRequest) -> Result<PredictResponse, ApiError> {
        let supplied = supplied_metrics(req)?;
        let p = self
            .inner
            .predictor
            .predict(&req.commit_message, &req.diff, &supplied)
            .await?;
        Ok(p.into())
    }

    async fn fetch(&self, body: &Bytes) -> Result<HostedCommit, ApiError> {
        let req: ShaRequest = parse_json(body)?;
        let (owner, repo) = req.validate().map_err(ApiError::invalid)?;
        let hosting = self.inner.hosting.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::UNAUTHORIZED,
                "MissingCredentials",
                "no hosting service token is configured",
            )
        })?;
        Ok(hosting.fetch_commit(owner, repo, &req.commit_sha).await?)
    }

    fn clm_client(&self) -> Result<&RemoteClient, ApiError> {
        if !self.inner.explain_enabled {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                "FeatureDisabled",
                "the explanation endpoints are disabled",
            ));
        }
        self.inner.clm.as_ref().ok_or_else(|| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "ClmBackendMissing",
                "no causal LM backend is configured",
            )
        })
    }

    async fn clm_text(&self, req: &PredictRequest) -> Result<Response, ApiError> {
        let client = self.clm_client()?;
        let limit = self.inner.predictor.max_diff_bytes;
        if req.diff.len() > limit {
            return Err(PredictError::DiffTooLarge {
                size: req.diff.len(),
                limit,
            }
            .into());
        }
        let text = client.clm_text(&req.payload()).await?;
        Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
    }
}

fn supplied_metrics(req: &PredictRequest) -> Result<ChangeMetrics, ApiError> {
    match &req.metrics {
        Some(map) => ChangeMetrics::from_map(map).map_err(|e| ApiError::invalid(e.to_string())),
        None => Ok(ChangeMetrics::unknown()),
    }
}

fn parse_json<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    if body.is_empty() {
        return Err(ApiError::invalid("request body is empty"));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(e.to_string()))
}

async fn health(State(s): State<AppState>) -> Json<HealthResponse> {
    let scorer = &s.inner.predictor.scorer;
    let reachable = match scorer {
        Scorer::Builtin(_) => true,
        Scorer::Remote(c) | Scorer::Clm(c) => c.is_healthy().await,
    };
    Json(HealthResponse {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        backend: if reachable { scorer.id() } else { "unavailable".into() },
        explain_enabled: s.inner.explain_enabled,
    })
}

async fn predict(State(s): State<AppState>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let req: PredictRequest = parse_json(&body)?;
    Ok(Json(s.predict_one(&req).await?))
}

async fn predict_batch(State(s): State<AppState>, body: Bytes) -> Result<Json<Vec<BatchSlot>>, ApiError> {
    let Value::Array(items) = parse_json::<Value>(&body)? else {
        return Err(ApiError::invalid("batch body must be a JSON array"));
    };
    if items.is_empty() {
        return Err(ApiError::invalid("batch is empty"));
    }
    if items.len() > s.inner.batch_cap {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "BatchTooLarge",
            format!("batch of {} exceeds the cap of {}", items.len(), s.inner.batch_cap),
        ));
    }
    let predictor = &s.inner.predictor;
    let prepared = items
        .into_iter()
        .map(|item| {
            let req: PredictRequest =
                serde_json::from_value(item).map_err(|e| PredictError::InvalidPayload(e.to_string()))?;
            let supplied = match &req.metrics {
                Some(map) => ChangeMetrics::from_map(map).map_err(|e| PredictError::InvalidPayload(e.to_string()))?,
                None => ChangeMetrics::unknown(),
            };
            predictor.prepare(&req.commit_message, &req.diff, &supplied)
        })
        .collect();
    let slots = predictor
        .predict_many(prepared)
        .await
        .into_iter()
        .map(|r| match r {
            Ok(p) => BatchSlot::Ok(p.into()),
            Err(e) => BatchSlot::Err(ApiError::from(e).body),
        })
        .collect();
    Ok(Json(slots))
}

async fn predict_by_sha(State(s): State<AppState>, body: Bytes) -> Result<Json<PredictResponse>, ApiError> {
    let commit = s.fetch(&body).await?;
    let mut resp = s.predict_one(&PredictRequest::new(commit.message, commit.diff)).await?;
    resp.sha = Some(commit.sha);
    Ok(Json(resp))
}

async fn clm_predict(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    s.clm_client()?;
    let req: PredictRequest = parse_json(&body)?;
    s.clm_text(&req).await
}

async fn clm_predict_by_sha(State(s): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    s.clm_client()?;
    let commit = s.fetch(&body).await?;
    s.clm_text(&PredictRequest::new(commit.message, commit.diff)).await
}

async fn log_request(State(s): State<AppState>, req: Request, next: Next) -> Response {
    let id = s.inner.next_request_id.fetch_add(1, Ordering::Relaxed);
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let size = req
        .headers()
        .get(header::CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<u64>().ok())
        .unwrap_or(0);
    let start = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        request_id = id,
        %method,
        path,
        bytes = size,
        status = resp.status().as_u16(),
        latency_ms = start.elapsed().as_secs_f64() * 1e3,
        "request"
    );
    resp
}

pub fn router(state: AppState) -> Router {
    let body_limit = state
        .inner
        .predictor
        .max_diff_bytes
        .saturating_mul(state.inner.batch_cap)
        .saturating_add(1 << 20)
        .min(512 << 20);
    Router::new()
        .route("/health", get(health))
        .route("/seq-cls/predict", post(predict))
        .route("/api/v1/drs/predict", post(predict))
        .route("/seq-cls/predict_batch", post(predict_batch))
        .route("/seq-cls/predict_by_sha", post(predict_by_sha))
        .route("/clm/predict", post(clm_predict))
        .route("/clm/predict_by_sha", post(clm_predict_by_sha))
        .layer(middleware::from_fn_with_state(state.clone(), log_request))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}
