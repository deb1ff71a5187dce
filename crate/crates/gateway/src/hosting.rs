//! Commit lookup on the code hosting service.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, USER_AGENT};
use reqwest::{Method, RequestBuilder, Response, StatusCode};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HostingError {
    #[error("hosting service rejected the credentials")]
    Unauthorized,
    #[error("commit not found")]
    NotFound,
    #[error("hosting service rate limit reached")]
    RateLimited { retry_after: Option<u64> },
    #[error("hosting service error: {0}")]
    Upstream(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostedCommit {
    pub sha: String,
    pub message: String,
    pub diff: String,
}

#[async_trait]
pub trait HostingClient: Send + Sync {
    async fn fetch_commit(&self, owner: &str, repo: &str, sha: &str) -> Result<HostedCommit, HostingError>;
}

/// Minimal GitHub REST client.
#[derive(Debug, Clone)]
pub struct GitHubClient {
    http: reqwest::Client,
    api_url: String,
    token: String,
}

#[derive(Deserialize)]
struct CommitJson {
    sha: String,
    commit: CommitDetail,
}

#[derive(Deserialize)]
struct CommitDetail {
    message: String,
}

pub const JSON_MEDIA_TYPE: &str = "application/vnd.github+json";
pub const DIFF_MEDIA_TYPE: &str = "application/vnd.github.diff";

impl GitHubClient {
    pub fn new(api_url: &str, token: &str, timeout_ms: u64) -> Result<Self, HostingError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| HostingError::Upstream(e.to_string()))?;
        Ok(Self {
            http,
            api_url: api_url.trim_end_matches('/').to_string(),
            token: token.to_string(),
        })
    }

    /// Authenticated request to `path` below the API root.
    pub fn request(&self, method: Method, path: &str, accept: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{}", self.api_url, path))
            .header(AUTHORIZATION, format!("Bearer {}", self.token))
            .header(ACCEPT, accept)
            .header(USER_AGENT, concat!("drs-gateway/", env!("CARGO_PKG_VERSION")))
            .header("X-GitHub-Api-Version", "2022-11-28")
    }

    /// Send and map non-success statuses onto [`HostingError`].
    pub async fn send(&self, req: RequestBuilder) -> Result<Response, HostingError> {
        let resp = req.send().await.map_err(|e| HostingError::Upstream(e.to_string()))?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        if let Some(retry_after) = rate_limit(status, resp.headers()) {
            return Err(HostingError::RateLimited { retry_after });
        }
        Err(match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => HostingError::Unauthorized,
            StatusCode::NOT_FOUND | StatusCode::UNPROCESSABLE_ENTITY => HostingError::NotFound,
            other => HostingError::Upstream(format!("status {other}")),
        })
    }
}

/// `Some(retry_after)` when the response signals an exhausted rate limit.
fn rate_limit(status: StatusCode, headers: &HeaderMap) -> Option<Option<u64>> {
    let header_u64 = |name: &str| headers.get(name)?.to_str().ok()?.trim().parse::<u64>().ok();
    let exhausted = header_u64("x-ratelimit-remaining") == Some(0);
    if status != StatusCode::TOO_MANY_REQUESTS && !(status == StatusCode::FORBIDDEN && exhausted) {
        return None;
    }
    let retry_after = header_u64("retry-after").or_else(|| {
        let reset = header_u64("x-ratelimit-reset")?;
        let now = chrono::Utc::now().timestamp().max(0) as u64;
        Some(reset.saturating_sub(now))
    });
    Some(retry_after)
}

#[async_trait]
impl HostingClient for GitHubClient {
    async fn fetch_commit(&self, owner: &str, repo: &str, sha: &str) -> Result<HostedCommit, HostingError> {
        let path = format!("/repos/{owner}/{repo}/commits/{sha}");
        let meta: CommitJson = self
            .send(self.request(Method::GET, &path, JSON_MEDIA_TYPE))
            .await?
            .json()
            .await
            .map_err(|e| HostingError::Upstream(e.to_string()))?;
        let diff = self
            .send(self.request(Method::GET, &path, DIFF_MEDIA_TYPE))
            .await?
            .text()
            .await
            .map_err(|e| HostingError::Upstream(e.to_string()))?;
        Ok(HostedCommit {
            sha: meta.sha,
            message: meta.commit.message,
            diff,
        })
    }
}
