//! Hosting-service and gateway access used by the bot.

use std::time::Duration;

use async_trait::async_trait;
use drs_gateway::hosting::{GitHubClient, HostedCommit, HostingClient, HostingError, JSON_MEDIA_TYPE};
use drs_gateway::wire::{BatchSlot, PredictRequest};
use reqwest::Method;
use serde::Deserialize;
use serde_json::json;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct IssueComment {
    pub id: u64,
    #[serde(default)]
    pub body: String,
}

/// Operations the bot needs from the hosting service.
#[async_trait]
pub trait Forge: Send + Sync {
    /// Commit shas of a pull request, oldest first.
    async fn list_pr_commits(&self, owner: &str, repo: &str, pr: u64) -> Result<Vec<String>, HostingError>;
    async fn fetch_commit(&self, owner: &str, repo: &str, sha: &str) -> Result<HostedCommit, HostingError>;
    async fn list_comments(&self, owner: &str, repo: &str, pr: u64) -> Result<Vec<IssueComment>, HostingError>;
    async fn create_comment(&self, owner: &str, repo: &str, pr: u64, body: &str) -> Result<u64, HostingError>;
    async fn update_comment(&self, owner: &str, repo: &str, id: u64, body: &str) -> Result<(), HostingError>;
    async fn create_commit_comment(&self, owner: &str, repo: &str, sha: &str, body: &str) -> Result<u64, HostingError>;
}

const PAGE: usize = 100;

#[derive(Deserialize)]
struct ShaOnly {
    sha: String,
}

#[derive(Deserialize)]
struct IdOnly {
    id: u64,
}

fn upstream(e: reqwest::Error) -> HostingError {
    HostingError::Upstream(e.to_string())
}

#[async_trait]
impl Forge for GitHubClient {
    async fn list_pr_commits(&self, owner: &str, repo: &str, pr: u64) -> Result<Vec<String>, HostingError> {
        let mut out = Vec::new();
        for page in 1.. {
            let path = format!("/repos/{owner}/{repo}/pulls/{pr}/commits?per_page={PAGE}&page={page}");
            let batch: Vec<ShaOnly> = self
                .send(self.request(Method::GET, &path, JSON_MEDIA_TYPE))
                .await?
                .json()
                .await
                .map_err(upstream)?;
            let done = batch.len() < PAGE;
            out.extend(batch.into_iter().map(|c| c.sha));
            if done {
                break;
            }
        }
        Ok(out)
    }

    async fn fetch_commit(&self, owner: &str, repo: &str, sha: &str) -> Result<HostedCommit, HostingError> {
        HostingClient::fetch_commit(self, owner, repo, sha).await
    }

    async fn list_comments(&self, owner: &str, repo: &str, pr: u64) -> Result<Vec<IssueComment>, HostingError> {
        let mut out = Vec::new();
        for page in 1.. {
            let path = format!("/repos/{owner}/{repo}/issues/{pr}/comments?per_page={PAGE}&page={page}");
            let batch: Vec<IssueComment> = self
                .send(self.request(Method::GET, &path, JSON_MEDIA_TYPE))
                .await?
                .json()
                .await
                .map_err(upstream)?;
            let done = batch.len() < PAGE;
            out.extend(batch);
            if done {
                break;
            }
        }
        Ok(out)
    }

    async fn create_comment(&self, owner: &str, repo: &str, pr: u64, body: &str) -> Result<u64, HostingError> {
        let path = format!("/repos/{owner}/{repo}/issues/{pr}/comments");
        let created: IdOnly = self
            .send(
                self.request(Method::POST, &path, JSON_MEDIA_TYPE)
                    .json(&json!({ "body": body })),
            )
            .await?
            .json()
            .await
            .map_err(upstream)?;
        Ok(created.id)
    }

    async fn update_comment(&self, owner: &str, repo: &str, id: u64, body: &str) -> Result<(), HostingError> {
        let path = format!("/repos/{owner}/{repo}/issues/comments/{id}");
        self.send(
            self.request(Method::PATCH, &path, JSON_MEDIA_TYPE)
                .json(&json!({ "body": body })),
        )
        .await?;
        Ok(())
    }

    async fn create_commit_comment(&self, owner: &str, repo: &str, sha: &str, body: &str) -> Result<u64, HostingError> {
        let path = format!("/repos/{owner}/{repo}/commits/{sha}/comments");
        let created: IdOnly = self
            .send(
                self.request(Method::POST, &path, JSON_MEDIA_TYPE)
                    .json(&json!({ "body": body })),
            )
            .await?
            .json()
            .await
            .map_err(upstream)?;
        Ok(created.id)
    }
}

/// The gateway's batch endpoint.
#[async_trait]
pub trait GatewayApi: Send + Sync {
    async fn predict_batch(&self, items: &[PredictRequest]) -> Result<Vec<BatchSlot>, String>;
}

/// [`GatewayApi`] over HTTP.
#[derive(Debug, Clone)]
pub struct HttpGateway {
    http: reqwest::Client,
    base_url: String,
}

impl HttpGateway {
    pub fn new(base_url: &str, timeout_ms: u64) -> Result<Self, String> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
        })
    }
}

#[async_trait]
impl GatewayApi for HttpGateway {
    async fn predict_batch(&self, items: &[PredictRequest]) -> Result<Vec<BatchSlot>, String> {
        let resp = self
            .http
            .post(format!("{}/seq-cls/predict_batch", self.base_url))
            .json(items)
            .send()
            .await
            .map_err(|e| format!("gateway unreachable: {e}"))?;
        let status = resp.status();
        let text = resp.text().await.map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("gateway returned {status}: {text}"));
        }
        let slots: Vec<BatchSlot> = serde_json::from_str(&text).map_err(|e| format!("bad gateway response: {e}"))?;
        if slots.len() != items.len() {
            return Err(format!(
                "gateway returned {} results for {} commits",
                slots.len(),
                items.len()
            ));
        }
        Ok(slots)
    }
}
