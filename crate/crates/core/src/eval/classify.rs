use serde::{Deserialize, Serialize};

use super::{check_inputs, EvalError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Zero when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `2TP / (2TP + FP + FN)`, equal to the harmonic mean of precision and
    /// recall and zero when both are zero.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Absent when only threshold metrics were computed.
    pub roc_auc: Option<f64>,
    pub threshold: f64,
    pub counts: ConfusionCounts,
}

impl EvalReport {
    pub fn from_counts(counts: ConfusionCounts, threshold: f64) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            accuracy: counts.accuracy(),
            roc_auc: None,
            threshold,
            counts,
        }
    }
}

/// Confusion-matrix metrics with `score >= tau` as the positive prediction.
pub fn classification_metrics(scores: &[f64], labels: &[bool], tau: f64) -> Result<EvalReport, EvalError> {
    check_inputs(scores, labels)?;
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= tau, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(EvalReport::from_counts(c, tau))
}

/// Area under the ROC curve as the Mann-Whitney statistic: the share of
/// (positive, negative) pairs ordered correctly, ties counting one half.
/// Computed from rank sums in O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|&&y| y).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; tied scores share their mean rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += mean_rank * pos_in_group as f64;
        i = j;
    }

    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub f1: f64,
}

/// Pick the F1-maximizing threshold among 0, 1 and the midpoints between
/// consecutive distinct scores. Equal F1 prefers the larger threshold.
pub fn sweep_threshold(scores: &[f64], labels: &[bool]) -> Result<ThresholdChoice, EvalError> {
    check_inputs(scores, labels)?;
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if y {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    if pos.is_empty() {
        return Err(EvalError::SingleClassInput);
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);

    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let at_or_above = |sorted: &[f64], tau: f64| sorted.len() - sorted.partition_point(|&s| s < tau);
    let mut best = ThresholdChoice { tau: 0.0, f1: -1.0 };
    for tau in candidates {
        let tp = at_or_above(&pos, tau);
        let fp = at_or_above(&neg, tau);
        let counts = ConfusionCounts {
            tp,
            fp,
            fn_: pos.len() - tp,
            tn: neg.len() - fp,
        };
        let f1 = counts.f1();
        if f1 >= best.f1 {
            best = ThresholdChoice { tau, f1 };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn hand_confusion_matrix() {
        let r = classification_metrics(&[0.9, 0.7, 0.4, 0.2], &b(&[1, 0, 1, 0]), 0.5).unwrap();
        assert_eq!(
            r.counts,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (0.5, 0.5, 0.5, 0.5));
        assert_eq!(r.roc_auc, None);
    }

    #[test]
    fn all_correct() {
        let r = classification_metrics(&[0.9, 0.1], &b(&[1, 0]), 0.5).unwrap();
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn no_predicted_positives() {
        let r = classification_metrics(&[0.1, 0.2], &b(&[1, 0]), 0.5).unwrap();
        assert_eq!(r.precision, 0.0);
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn metric_input_errors() {
        assert_eq!(
            classification_metrics(&[0.1], &b(&[1, 0]), 0.5),
            Err(EvalError::LengthMismatch { scores: 1, labels: 2 })
        );
        assert_eq!(classification_metrics(&[], &[], 0.5), Err(EvalError::EmptyInput));
        assert_eq!(
            classification_metrics(&[f64::NAN], &[true], 0.5),
            Err(EvalError::NonFiniteScore(0))
        );
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.3, 0.1], &b(&[1, 1, 0, 0])).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.6, 0.4, 0.1], &b(&[1, 0, 1, 0])).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.5, 0.5], &b(&[1, 0])).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.9], &b(&[1, 0])).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5, 0.6], &b(&[1, 1])), Err(EvalError::SingleClassInput));
    }

    #[test]
    fn sweep_examples() {
        let c = sweep_threshold(&[0.2, 0.4, 0.9], &b(&[0, 1, 1])).unwrap();
        assert!((c.tau - 0.3).abs() < 1e-15);
        assert_eq!(c.f1, 1.0);

        let all_pos = sweep_threshold(&[0.2, 0.4, 0.9], &b(&[1, 1, 1])).unwrap();
        assert_eq!(all_pos, ThresholdChoice { tau: 0.0, f1: 1.0 });

        assert_eq!(
            sweep_threshold(&[0.2, 0.4], &b(&[0, 0])),
            Err(EvalError::SingleClassInput)
        );
    }

    #[test]
    fn sweep_prefers_larger_threshold_on_ties() {
        // tau=0.5 and tau=0.85 both reach F1 = 2/3 only if ties exist; build one:
        // scores 0.2(neg) 0.8(pos) 0.9(neg): candidates 0, 0.5, 0.85, 1.
        // tau 0: tp1 fp2 -> 0.5; tau 0.5: tp1 fp1 -> 2/3; tau 0.85: tp0 -> 0.
        let c = sweep_threshold(&[0.2, 0.8, 0.9], &b(&[0, 1, 0])).unwrap();
        assert_eq!(c.tau, 0.5);
        // tau 0 gives tp2 fp2 (F1 4/6); tau 0.75 gives tp1 fn1 (F1 2/3).
        let c = sweep_threshold(&[0.9, 0.5, 0.6, 0.1], &b(&[1, 0, 0, 1])).unwrap();
        assert_eq!(c.f1, 2.0 / 3.0);
        assert_eq!(c.tau, 0.75);
    }
}
