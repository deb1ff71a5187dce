//! End-to-end scoring of one commit: parse, measure, bucket, structure,
//! truncate and score.

use thiserror::Error;

use crate::diff::{
    parse_unified_diff, structure_commit, truncate_to_budget, Commit, CountingRule, DiffError, StructuredText,
    DEFAULT_BUDGET,
};
use crate::metrics::{compute_diff_metrics, render_metric_tokens, BucketThresholds, BucketedMetrics, ChangeMetrics};
use crate::scoring::{RiskScore, ScoreError, Scorer, ScoringInput};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("diff is {size} bytes, limit is {limit}")]
    DiffTooLarge { size: usize, limit: usize },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Default cap on raw diff size.
pub const DEFAULT_MAX_DIFF_BYTES: usize = 1 << 20;

/// A commit made ready for a scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCommit {
    pub message: String,
    pub raw_diff: String,
    pub metrics: ChangeMetrics,
    pub buckets: BucketedMetrics,
    pub structured: StructuredText,
}

impl PreparedCommit {
    pub fn input(&self) -> ScoringInput<'_> {
        ScoringInput {
            structured: &self.structured,
            buckets: &self.buckets,
            raw_diff: &self.raw_diff,
            commit_message: &self.message,
            metrics: &self.metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub score: RiskScore,
    pub truncated: bool,
    pub unit_count: usize,
}

#[derive(Debug, Clone)]
pub struct Predictor {
    pub scorer: Scorer,
    /// Without cut points every metric buckets to UNKNOWN.
    pub calibration: Option<BucketThresholds>,
    pub threshold: f64,
    pub budget: usize,
    pub rule: CountingRule,
    pub max_diff_bytes: usize,
}

impl Predictor {
    pub fn new(scorer: Scorer, threshold: f64) -> Self {
        Self {
            scorer,
            calibration: None,
            threshold,
            budget: DEFAULT_BUDGET,
            rule: CountingRule::default(),
            max_diff_bytes: DEFAULT_MAX_DIFF_BYTES,
        }
    }

    pub fn bucketize(&self, metrics: &ChangeMetrics) -> BucketedMetrics {
        match &self.calibration {
            Some(c) => c.bucketize(metrics),
            None => BucketedMetrics::all_unknown(),
        }
    }

    /// Validate and structure one commit. `supplied` metrics override the
    /// values derived from the diff.
    pub fn prepare(
        &self,
        message: &str,
        raw_diff: &str,
        supplied: &ChangeMetrics,
    ) -> Result<PreparedCommit, PredictError> {
        if message.trim().is_empty() && raw_diff.trim().is_empty() {
            return Err(PredictError::InvalidPayload(
                "diff and commit_message are both empty".into(),
            ));
        }
        if raw_diff.len() > self.max_diff_bytes {
            return Err(PredictError::DiffTooLarge {
                size: raw_diff.len(),
                limit: self.max_diff_bytes,
            });
        }
        let doc = parse_unified_diff(raw_diff)?;
        let mut metrics = compute_diff_metrics(&doc);
        metrics.merge(supplied);
        let buckets = self.bucketize(&metrics);
        let block = render_metric_tokens(&buckets);
        let commit = Commit::manual(message, raw_diff);
        let full = structure_commit(&commit, Some(&block), &doc, self.rule);
        let structured = truncate_to_budget(&full, self.budget)?;
        Ok(PreparedCommit {
            message: message.to_string(),
            raw_diff: raw_diff.to_string(),
            metrics,
            buckets,
            structured,
        })
    }

    pub async fn predict_prepared(&self, prepared: &PreparedCommit) -> Result<Prediction, PredictError> {
        let score = self.scorer.score(&prepared.input(), self.threshold).await?;
        Ok(self.prediction(score, prepared))
    }

    pub async fn predict(
        &self,
        message: &str,
        raw_diff: &str,
        supplied: &ChangeMetrics,
    ) -> Result<Prediction, PredictError> {
        let prepared = self.prepare(message, raw_diff, supplied)?;
        self.predict_prepared(&prepared).await
    }

    /// Score several prepared commits in one backend call. Slots that failed
    /// preparation keep their error; a failed backend call fails every
    /// remaining slot.
    pub async fn predict_many(
        &self,
        items: Vec<Result<PreparedCommit, PredictError>>,
    ) -> Vec<Result<Prediction, PredictError>> {
        let ready: Vec<&PreparedCommit> = items.iter().filter_map(|r| r.as_ref().ok()).collect();
        let inputs: Vec<ScoringInput<'_>> = ready.iter().map(|p| p.input()).collect();
        let mut probabilities = match self.scorer.probabilities(&inputs).await {
            Ok(ps) => ps.into_iter().map(Ok).collect::<Vec<_>>(),
            Err(e) => vec![Err(e); inputs.len()],
        }
        .into_iter();
        let id = self.scorer.id();
        items
            .iter()
            .map(|item| {
                let prepared = item.as_ref().map_err(Clone::clone)?;
                let p = probabilities.next().expect("one probability per prepared item")?;
                Ok(self.prediction(RiskScore::new(p, self.threshold, id.clone()), prepared))
            })
            .collect()
    }

    fn prediction(&self, score: RiskScore, prepared: &PreparedCommit) -> Prediction {
        Prediction {
            score,
            truncated: prepared.structured.truncated,
            unit_count: prepared.structured.unit_count,
        }
    }
}
