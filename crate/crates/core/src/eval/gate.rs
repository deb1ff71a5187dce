use serde::{Deserialize, Serialize};

use super::{check_inputs, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GatePolicy {
    /// Gate the `k` percent highest-scored commits, `0 < k <= 100`.
    TopPercent { k: f64 },
    /// Gate every commit scoring at least `tau`.
    FixedThreshold { tau: f64 },
}

impl GatePolicy {
    pub fn top_percent(k: f64) -> Result<Self, EvalError> {
        let p = GatePolicy::TopPercent { k };
        p.validate()?;
        Ok(p)
    }

    pub fn fixed_threshold(tau: f64) -> Result<Self, EvalError> {
        let p = GatePolicy::FixedThreshold { tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        match *self {
            GatePolicy::TopPercent { k } if !(k > 0.0 && k <= 100.0) => {
                Err(EvalError::InvalidPolicy(format!("k={k} outside (0, 100]")))
            }
            GatePolicy::FixedThreshold { tau } if !(0.0..=1.0).contains(&tau) => {
                Err(EvalError::InvalidPolicy(format!("tau={tau} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub gated_count: usize,
    pub total: usize,
    pub buggy_total: usize,
    pub buggy_gated: usize,
    /// `buggy_gated / buggy_total`, or 0 without buggy commits.
    pub captured_fraction: f64,
}

impl GateReport {
    fn new(gated_count: usize, total: usize, buggy_total: usize, buggy_gated: usize) -> Self {
        let captured_fraction = if buggy_total == 0 {
            0.0
        } else {
            buggy_gated as f64 / buggy_total as f64
        };
        Self {
            gated_count,
            total,
            buggy_total,
            buggy_gated,
            captured_fraction,
        }
    }

    pub fn gated_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.gated_count as f64 / self.total as f64
        }
    }
}

/// `ceil(k / 100 * n)`, at least one and at most `n`.
pub fn top_k_count(n: usize, k_percent: f64) -> usize {
    let exact = k_percent / 100.0 * n as f64;
    // 0.3 * 10 evaluates to 3.0000000000000004; do not round that up to 4.
    let nearest = exact.round();
    let count = if (exact - nearest).abs() < 1e-9 {
        nearest
    } else {
        exact.ceil()
    };
    (count as usize).clamp(1, n.max(1)).min(n)
}

/// Indices ordered by descending score; equal scores keep input order.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

fn top_k_report(scores: &[f64], labels: &[bool], k_percent: f64) -> GateReport {
    let n_top = top_k_count(scores.len(), k_percent);
    let buggy_total = labels.iter().filter(|&&y| y).count();
    let buggy_gated = ranking(scores)[..n_top].iter().filter(|&&i| labels[i]).count();
    GateReport::new(n_top, scores.len(), buggy_total, buggy_gated)
}

/// Share of buggy commits among the `k_percent` highest-scored ones.
pub fn recall_at_top_k(scores: &[f64], labels: &[bool], k_percent: f64) -> Result<f64, EvalError> {
    check_inputs(scores, labels)?;
    GatePolicy::top_percent(k_percent)?;
    if !labels.iter().any(|&y| y) {
        return Err(EvalError::SingleClassInput);
    }
    Ok(top_k_report(scores, labels, k_percent).captured_fraction)
}

pub fn simulate_gate(scores: &[f64], labels: &[bool], policy: GatePolicy) -> Result<GateReport, EvalError> {
    check_inputs(scores, labels)?;
    policy.validate()?;
    Ok(match policy {
        GatePolicy::TopPercent { k } => top_k_report(scores, labels, k),
        GatePolicy::FixedThreshold { tau } => {
            let mut gated = 0;
            let mut buggy_gated = 0;
            for (&s, &y) in scores.iter().zip(labels) {
                if s >= tau {
                    gated += 1;
                    buggy_gated += y as usize;
                }
            }
            let buggy_total = labels.iter().filter(|&&y| y).count();
            GateReport::new(gated, scores.len(), buggy_total, buggy_gated)
        }
    })
}
