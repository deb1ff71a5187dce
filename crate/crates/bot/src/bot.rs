use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use drs_gateway::wire::{BatchSlot, PredictRequest};

use crate::card::{render_card, CardFooter, CardRow, RowOutcome, CARD_MARKER};
use crate::event::{is_drs_command, EventKind, WebhookEvent};
use crate::forge::{Forge, GatewayApi};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgnoreReason {
    DuplicateDelivery,
    NotACommand,
    OwnComment,
    PushNotTracked,
    NothingPushed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommentTarget {
    PullRequest { pr: u64, comment_id: u64, updated: bool },
    Commit { sha: String, comment_id: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Ignore(IgnoreReason),
    PostComment { target: CommentTarget, body: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BotSettings {
    /// Ignore push events and only react to pull requests.
    pub pr_only: bool,
    /// Deliveries remembered for replay protection.
    pub dedup_ttl: Duration,
    /// Largest batch sent to the gateway in one call.
    pub batch_cap: usize,
}

impl Default for BotSettings {
    fn default() -> Self {
        Self {
            pr_only: true,
            dedup_ttl: Duration::from_secs(3600),
            batch_cap: 64,
        }
    }
}

/// Delivery ids seen within the retention window.
#[derive(Debug, Default)]
pub struct DeliveryCache {
    seen: Mutex<HashMap<String, Instant>>,
}

impl DeliveryCache {
    /// Record `id`; false when it was already seen within `ttl`.
    pub fn insert(&self, id: &str, ttl: Duration) -> bool {
        let now = Instant::now();
        let mut seen = self.seen.lock().expect("delivery cache poisoned");
        seen.retain(|_, at| now.duration_since(*at) < ttl);
        if seen.contains_key(id) {
            return false;
        }
        seen.insert(id.to_string(), now);
        true
    }
}

/// One async mutex per key.
#[derive(Debug, Default)]
pub struct KeyedLocks {
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl KeyedLocks {
    pub async fn lock(&self, key: &str) -> tokio::sync::OwnedMutexGuard<()> {
        let lock = {
            let mut map = self.locks.lock().expect("lock table poisoned");
            map.retain(|_, l| Arc::strong_count(l) > 1);
            map.entry(key.to_string()).or_default().clone()
        };
        lock.lock_owned().await
    }
}

pub struct Bot {
    forge: Arc<dyn Forge>,
    gateway: Arc<dyn GatewayApi>,
    settings: BotSettings,
    deliveries: DeliveryCache,
    locks: KeyedLocks,
}

impl Bot {
    pub fn new(forge: Arc<dyn Forge>, gateway: Arc<dyn GatewayApi>, settings: BotSettings) -> Self {
        Self {
            forge,
            gateway,
            settings,
            deliveries: DeliveryCache::default(),
            locks: KeyedLocks::default(),
        }
    }

    pub async fn handle(&self, event: &WebhookEvent) -> Result<Action, crate::BotError> {
        if !self.deliveries.insert(&event.delivery_id, self.settings.dedup_ttl) {
            return Ok(Action::Ignore(IgnoreReason::DuplicateDelivery));
        }
        match event.kind {
            EventKind::PullRequestOpened | EventKind::PullRequestSynchronize => self.score_pr(event).await,
            EventKind::IssueComment => {
                if event.from_bot {
                    return Ok(Action::Ignore(IgnoreReason::OwnComment));
                }
                if !event.comment_body.as_deref().is_some_and(is_drs_command) {
                    return Ok(Action::Ignore(IgnoreReason::NotACommand));
                }
                self.score_pr(event).await
            }
            EventKind::Push if self.settings.pr_only => Ok(Action::Ignore(IgnoreReason::PushNotTracked)),
            EventKind::Push => self.score_push(event).await,
        }
    }

    async fn score_pr(&self, event: &WebhookEvent) -> Result<Action, crate::BotError> {
        let (owner, repo) = event.owner_and_name();
        let pr = event
            .pr_number
            .ok_or_else(|| crate::BotError::BadPayload("pull request number missing".into()))?;
        let _guard = self.locks.lock(&format!("{}#{pr}", event.repo)).await;

        let shas = self.forge.list_pr_commits(owner, repo, pr).await?;
        let body = self.score_commits(owner, repo, &shas).await;

        let existing = self
            .forge
            .list_comments(owner, repo, pr)
            .await?
            .into_iter()
            .find(|c| c.body.starts_with(CARD_MARKER));
        let target = match existing {
            Some(c) => {
                self.forge.update_comment(owner, repo, c.id, &body).await?;
                CommentTarget::PullRequest {
                    pr,
                    comment_id: c.id,
                    updated: true,
                }
            }
            None => CommentTarget::PullRequest {
                pr,
                comment_id: self.forge.create_comment(owner, repo, pr, &body).await?,
                updated: false,
            },
        };
        tracing::info!(repo = %event.repo, pr, commits = shas.len(), "posted risk card");
        Ok(Action::PostComment { target, body })
    }

    async fn score_push(&self, event: &WebhookEvent) -> Result<Action, crate::BotError> {
        let (owner, repo) = event.owner_and_name();
        let Some(head) = event.pushed_commits.last() else {
            return Ok(Action::Ignore(IgnoreReason::NothingPushed));
        };
        let _guard = self.locks.lock(&format!("{}@{head}", event.repo)).await;
        let body = self.score_commits(owner, repo, &event.pushed_commits).await;
        let comment_id = self.forge.create_commit_comment(owner, repo, head, &body).await?;
        Ok(Action::PostComment {
            target: CommentTarget::Commit {
                sha: head.clone(),
                comment_id,
            },
            body,
        })
    }

    /// Fetch and score `shas`, rendering a card. Failures become error rows.
    async fn score_commits(&self, owner: &str, repo: &str, shas: &[String]) -> String {
        let mut outcomes: Vec<Option<RowOutcome>> = vec![None; shas.len()];
        let mut requests = Vec::new();
        let mut slots_of_request = Vec::new();
        for (i, sha) in shas.iter().enumerate() {
            match self.forge.fetch_commit(owner, repo, sha).await {
                Ok(c) => {
                    requests.push(PredictRequest::new(c.message, c.diff));
                    slots_of_request.push(i);
                }
                Err(e) => outcomes[i] = Some(RowOutcome::Failed(format!("fetch failed: {e}"))),
            }
        }

        let mut footer = None;
        let mut note = None;
        let cap = self.settings.batch_cap.max(1);
        for (chunk, slots) in requests.chunks(cap).zip(slots_of_request.chunks(cap)) {
            match self.gateway.predict_batch(chunk).await {
                Ok(results) => {
                    for (slot, result) in slots.iter().zip(results) {
                        outcomes[*slot] = Some(match result {
                            BatchSlot::Ok(r) => {
                                footer.get_or_insert(CardFooter {
                                    scorer_id: r.scorer_id.clone(),
                                    threshold: r.threshold,
                                });
                                RowOutcome::Scored {
                                    label: r.label.as_str().to_string(),
                                    confidence: r.confidence,
                                }
                            }
                            BatchSlot::Err(e) => RowOutcome::Failed(e.error),
                        });
                    }
                }
                Err(e) => {
                    tracing::warn!(error = %e, "gateway batch call failed");
                    note = Some(format!("Scoring failed: {e}"));
                    for slot in slots {
                        outcomes[*slot] = Some(RowOutcome::Failed("gateway unavailable".into()));
                    }
                }
            }
        }

        let rows: Vec<CardRow> = shas
            .iter()
            .zip(outcomes)
            .map(|(sha, outcome)| CardRow {
                sha: sha.clone(),
                outcome: outcome.unwrap_or_else(|| RowOutcome::Failed("not scored".into())),
            })
            .collect();
        render_card(&rows, footer.as_ref(), note.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delivery_cache_expires() {
        let cache = DeliveryCache::default();
        assert!(cache.insert("a", Duration::from_secs(60)));
        assert!(!cache.insert("a", Duration::from_secs(60)));
        assert!(cache.insert("b", Duration::from_secs(60)));
        assert!(cache.insert("a", Duration::ZERO));
    }

    #[tokio::test]
    async fn keyed_locks_serialize_same_key() {
        let locks = Arc::new(KeyedLocks::default());
        let g = locks.lock("o/r#1").await;
        let other = tokio::time::timeout(Duration::from_millis(50), locks.lock("o/r#2")).await;
        assert!(other.is_ok());
        let same = tokio::time::timeout(Duration::from_millis(50), locks.lock("o/r#1")).await;
        assert!(same.is_err());
        drop(g);
        assert!(tokio::time::timeout(Duration::from_millis(50), locks.lock("o/r#1"))
            .await
            .is_ok());
    }
}
