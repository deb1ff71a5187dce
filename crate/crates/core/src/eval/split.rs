use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    train: f64,
    valid: f64,
    test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self, EvalError> {
        let parts = [train, valid, test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidFractions);
        }
        Ok(Self { train, valid, test })
    }
}

impl Default for SplitFractions {
    /// 80/10/10.
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

fn floor_count(fraction: f64, n: usize) -> usize {
    // Absorb representation error such as 0.1 * 30 = 3.0000000000000004.
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Stable sort by author timestamp, then cut by cumulative counts: floor for
/// train and validation, the remainder to test.
pub fn chronological_split(ds: &Dataset, fractions: SplitFractions) -> Split {
    let mut rows = ds.rows.clone();
    rows.sort_by_key(|r| r.commit.author_timestamp);
    let n = rows.len();
    let n_train = floor_count(fractions.train, n).min(n);
    let n_valid = floor_count(fractions.valid, n).min(n - n_train);
    let test = rows.split_off(n_train + n_valid);
    let valid = rows.split_off(n_train);
    Split {
        train: Dataset::new(rows),
        valid: Dataset::new(valid),
        test: Dataset::new(test),
    }
}

/// Keep the minority class whole and a uniform `round(ratio * majority)`
/// sample of the majority class. Retained rows keep their input order.
pub fn undersample_majority(train: &Dataset, ratio: f64, seed: u64) -> Result<Dataset, EvalError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    let buggy = train.buggy_count();
    let clean = train.len() - buggy;
    if buggy == 0 || clean == 0 || buggy == clean {
        tracing::warn!(buggy, clean, "no majority class to undersample");
        return Ok(train.clone());
    }
    let majority_buggy = buggy > clean;
    let majority: Vec<usize> = train
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.buggy == majority_buggy)
        .map(|(i, _)| i)
        .collect();
    let keep_count = (ratio * majority.len() as f64).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; train.len()];
    for i in sample(&mut rng, majority.len(), keep_count) {
        keep[majority[i]] = true;
    }
    Ok(Dataset::new(
        train
            .rows
            .iter()
            .enumerate()
            .filter(|(i, r)| r.buggy != majority_buggy || keep[*i])
            .map(|(_, r)| r.clone())
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Commit;
    use crate::eval::LabeledCommit;
    use crate::metrics::ChangeMetrics;

    fn row(ts: i64, buggy: bool, tag: usize) -> LabeledCommit {
        LabeledCommit {
            commit: Commit {
                repo: format!("r{tag}"),
                sha: String::new(),
                author_timestamp: ts,
                message: String::new(),
                raw_diff: String::new(),
            },
            metrics: ChangeMetrics::unknown(),
            buggy,
        }
    }

    #[test]
    fn ten_rows_eight_one_one() {
        let ds = Dataset::new((1..=10).rev().map(|t| row(t, false, 0)).collect());
        let s = chronological_split(&ds, SplitFractions::default());
        let ts = |d: &Dataset| d.rows.iter().map(|r| r.commit.author_timestamp).collect::<Vec<_>>();
        assert_eq!(ts(&s.train), (1..=8).collect::<Vec<_>>());
        assert_eq!(ts(&s.valid), vec![9]);
        assert_eq!(ts(&s.test), vec![10]);
    }

    #[test]
    fn equal_timestamps_keep_input_order() {
        let ds = Dataset::new((0..10).map(|i| row(5, false, i)).collect());
        let s = chronological_split(&ds, SplitFractions::default());
        let tags: Vec<String> = s
            .train
            .rows
            .iter()
            .chain(&s.valid.rows)
            .chain(&s.test.rows)
            .map(|r| r.commit.repo.clone())
            .collect();
        assert_eq!(tags, (0..10).map(|i| format!("r{i}")).collect::<Vec<_>>());
    }

    #[test]
    fn awkward_sizes() {
        for n in [1, 2, 3, 7, 29, 30, 31, 99, 1000] {
            let ds = Dataset::new((0..n).map(|i| row(i as i64, false, i)).collect());
            let s = chronological_split(&ds, SplitFractions::default());
            assert_eq!(s.train.len(), (n * 8) / 10, "n={n}");
            assert_eq!(s.valid.len(), n / 10, "n={n}");
            assert_eq!(s.train.len() + s.valid.len() + s.test.len(), n);
        }
    }

    #[test]
    fn fractions_must_sum_to_one() {
        assert!(SplitFractions::new(0.8, 0.1, 0.1).is_ok());
        assert!(SplitFractions::new(0.8, 0.2, 0.1).is_err());
        assert!(SplitFractions::new(1.2, -0.1, -0.1).is_err());
    }

    fn imbalanced(clean: usize, buggy: usize) -> Dataset {
        Dataset::new((0..clean + buggy).map(|i| row(i as i64, i >= clean, i)).collect())
    }

    #[test]
    fn seventy_percent_of_majority() {
        let ds = imbalanced(100, 30);
        let out = undersample_majority(&ds, 0.7, 42).unwrap();
        assert_eq!(out.buggy_count(), 30);
        assert_eq!(out.len() - out.buggy_count(), 70);
        assert_eq!(out, undersample_majority(&ds, 0.7, 42).unwrap());
        assert_ne!(out, undersample_majority(&ds, 0.7, 43).unwrap());
    }

    #[test]
    fn buggy_majority_is_sampled_too() {
        let ds = imbalanced(10, 40);
        let out = undersample_majority(&ds, 0.5, 1).unwrap();
        assert_eq!(out.buggy_count(), 20);
        assert_eq!(out.len(), 30);
    }

    #[test]
    fn ratio_one_and_degenerate_inputs() {
        let ds = imbalanced(100, 30);
        assert_eq!(undersample_majority(&ds, 1.0, 7).unwrap(), ds);
        let single = imbalanced(10, 0);
        assert_eq!(undersample_majority(&single, 0.7, 7).unwrap(), single);
        assert_eq!(undersample_majority(&ds, 0.0, 7), Err(EvalError::InvalidRatio(0.0)));
        assert!(undersample_majority(&ds, 1.5, 7).is_err());
    }
}
