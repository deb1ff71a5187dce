//! Webhook payload parsing and the `/drs` command rule.

use hmac::{Hmac, Mac};
use serde_json::Value;
use sha2::Sha256;

use crate::BotError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PullRequestOpened,
    PullRequestSynchronize,
    Push,
    IssueComment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebhookEvent {
    pub kind: EventKind,
    /// `owner/name`.
    pub repo: String,
    pub pr_number: Option<u64>,
    pub comment_body: Option<String>,
    pub delivery_id: String,
    /// Commits listed in a push payload, oldest first.
    pub pushed_commits: Vec<String>,
    /// Whether the comment author is a bot account.
    pub from_bot: bool,
}

impl WebhookEvent {
    pub fn owner_and_name(&self) -> (&str, &str) {
        self.repo.split_once('/').unwrap_or((&self.repo, ""))
    }
}

/// Check `X-Hub-Signature-256` (`sha256=<hex>`) against the raw body.
pub fn verify_signature(secret: &[u8], body: &[u8], header: Option<&str>) -> Result<(), BotError> {
    let hex_sig = header
        .and_then(|h| h.trim().strip_prefix("sha256="))
        .ok_or(BotError::SignatureMismatch)?;
    let expected = hex::decode(hex_sig).map_err(|_| BotError::SignatureMismatch)?;
    let mut mac = Hmac::<Sha256>::new_from_slice(secret).map_err(|_| BotError::SignatureMismatch)?;
    mac.update(body);
    mac.verify_slice(&expected).map_err(|_| BotError::SignatureMismatch)
}

/// `sha256=<hex>` signature for `body`.
pub fn sign(secret: &[u8], body: &[u8]) -> String {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret).expect("hmac accepts any key length");
    mac.update(body);
    format!("sha256={}", hex::encode(mac.finalize().into_bytes()))
}

/// True when the first whitespace-delimited token is exactly `/drs`.
pub fn is_drs_command(body: &str) -> bool {
    body.split_whitespace().next() == Some("/drs")
}

fn repo_name(payload: &Value) -> Result<String, BotError> {
    payload["repository"]["full_name"]
        .as_str()
        .filter(|r| r.contains('/'))
        .map(str::to_string)
        .ok_or_else(|| BotError::BadPayload("repository.full_name missing".into()))
}

/// Parse a delivery. `Ok(None)` means the event type or action is not one
/// the bot reacts to.
pub fn parse_event(event: &str, delivery_id: &str, body: &[u8]) -> Result<Option<WebhookEvent>, BotError> {
    let payload: Value = serde_json::from_slice(body).map_err(|e| BotError::BadPayload(e.to_string()))?;
    let base = |kind| -> Result<WebhookEvent, BotError> {
        Ok(WebhookEvent {
            kind,
            repo: repo_name(&payload)?,
            pr_number: None,
            comment_body: None,
            delivery_id: delivery_id.to_string(),
            pushed_commits: Vec::new(),
            from_bot: false,
        })
    };
    let number = |v: &Value| {
        v.as_u64()
            .ok_or_else(|| BotError::BadPayload("pull request number missing".into()))
    };
    match event {
        "pull_request" => {
            let kind = match payload["action"].as_str() {
                Some("opened") => EventKind::PullRequestOpened,
                Some("synchronize") => EventKind::PullRequestSynchronize,
                _ => return Ok(None),
            };
            let mut ev = base(kind)?;
            ev.pr_number = Some(number(&payload["pull_request"]["number"]).or_else(|_| number(&payload["number"]))?);
            Ok(Some(ev))
        }
        "issue_comment" => {
            if payload["action"].as_str() != Some("created") || payload["issue"]["pull_request"].is_null() {
                return Ok(None);
            }
            let mut ev = base(EventKind::IssueComment)?;
            ev.pr_number = Some(number(&payload["issue"]["number"])?);
            ev.comment_body = Some(payload["comment"]["body"].as_str().unwrap_or_default().to_string());
            ev.from_bot = payload["comment"]["user"]["type"].as_str() == Some("Bot");
            Ok(Some(ev))
        }
        "push" => {
            let mut ev = base(EventKind::Push)?;
            ev.pushed_commits = payload["commits"]
                .as_array()
                .map(|cs| cs.iter().filter_map(|c| c["id"].as_str().map(str::to_string)).collect())
                .unwrap_or_default();
            Ok(Some(ev))
        }
        _ => Ok(None),
    }
}
