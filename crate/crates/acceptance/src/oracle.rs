//! Slow, obviously-correct reference implementations.

/// Pairwise ROC-AUC: share of (buggy, clean) pairs ranked correctly, ties
/// counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// F1 when `score >= tau` is predicted buggy.
pub fn f1_at(scores: &[f64], labels: &[bool], tau: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= tau, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Best F1 over `points` evenly spaced thresholds in [0, 1].
pub fn grid_best_f1(scores: &[f64], labels: &[bool], points: usize) -> f64 {
    (0..points)
        .map(|i| f1_at(scores, labels, i as f64 / (points - 1) as f64))
        .fold(0.0, f64::max)
}

/// Best F1 over every threshold that can change a prediction: each score,
/// and anything above the maximum.
pub fn exhaustive_best_f1(scores: &[f64], labels: &[bool]) -> f64 {
    scores
        .iter()
        .copied()
        .chain([f64::INFINITY])
        .map(|t| f1_at(scores, labels, t))
        .fold(0.0, f64::max)
}

/// Gated count for the top k%: smallest m with `100 m >= k n`, in integer
/// arithmetic on k given in hundredths of a percent, clamped to [1, n].
pub fn top_count_hundredths(n: usize, k_hundredths: u64) -> usize {
    let need = k_hundredths * n as u64;
    let m = need.div_ceil(10_000) as usize;
    m.clamp(1, n)
}

/// Recall of the top `m` commits after a stable descending sort done by
/// repeated selection.
pub fn recall_of_top(scores: &[f64], labels: &[bool], m: usize) -> f64 {
    let mut taken = vec![false; scores.len()];
    let mut caught = 0usize;
    for _ in 0..m {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("m <= n");
        taken[b] = true;
        caught += labels[b] as usize;
    }
    let buggy = labels.iter().filter(|&&y| y).count();
    if buggy == 0 {
        0.0
    } else {
        caught as f64 / buggy as f64
    }
}

/// Shannon entropy of changed lines across files, divided by log2 of the
/// file count. Files without changed lines still count towards the divisor.
pub fn entropy(changed: &[usize]) -> f64 {
    let total: usize = changed.iter().sum();
    if changed.len() < 2 || total == 0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &c in changed {
        if c > 0 {
            let p = c as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h / (changed.len() as f64).log2()
}
