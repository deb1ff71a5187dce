use serde::{Deserialize, Serialize};

use super::ScoreError;
use crate::metrics::{Bucket, BucketedMetrics, Metric};

/// One indicator per (metric, level) pair plus the bias.
pub const FEATURE_COUNT: usize = Metric::ALL.len() * Bucket::ALL.len() + 1;
const BIAS: usize = FEATURE_COUNT - 1;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            iterations: 2000,
            l2: 1e-3,
        }
    }
}

/// Logistic regression over one-hot bucket indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile")]
pub struct BaselineModel {
    weights: Vec<f64>,
    trained: bool,
}

#[derive(Deserialize)]
struct ModelFile {
    weights: Vec<f64>,
    trained: bool,
}

impl TryFrom<ModelFile> for BaselineModel {
    type Error = ScoreError;

    fn try_from(raw: ModelFile) -> Result<Self, Self::Error> {
        if raw.weights.iter().any(|w| !w.is_finite()) {
            return Err(ScoreError::InvalidConfig("baseline weights must be finite".into()));
        }
        let mut model = Self::from_weights(raw.weights)?;
        model.trained = raw.trained;
        Ok(model)
    }
}

impl Default for BaselineModel {
    fn default() -> Self {
        Self::untrained()
    }
}

impl BaselineModel {
    pub const SCORER_ID: &'static str = "builtin-logreg";

    /// All-zero weights; predicts 0.5 everywhere.
    pub fn untrained() -> Self {
        Self {
            weights: vec![0.0; FEATURE_COUNT],
            trained: false,
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ScoreError> {
        if weights.len() != FEATURE_COUNT {
            return Err(ScoreError::InvalidConfig(format!(
                "baseline needs {FEATURE_COUNT} weights, got {}",
                weights.len()
            )));
        }
        Ok(Self { weights, trained: true })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.weights[BIAS]
    }

    pub fn weight(&self, metric: Metric, bucket: Bucket) -> f64 {
        self.weights[feature_index(metric, bucket)]
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn logit(&self, bm: &BucketedMetrics) -> f64 {
        Metric::ALL
            .iter()
            .map(|&m| self.weights[feature_index(m, bm.get(m))])
            .sum::<f64>()
            + self.weights[BIAS]
    }

    pub fn predict(&self, bm: &BucketedMetrics) -> f64 {
        sigmoid(self.logit(bm))
    }

    /// Full-batch gradient descent from zero weights.
    pub fn train(examples: &[(BucketedMetrics, bool)], opts: &TrainOptions) -> Result<Self, ScoreError> {
        let positives = examples.iter().filter(|(_, y)| *y).count();
        let negatives = examples.len() - positives;
        if positives < 2 || negatives < 2 {
            return Err(ScoreError::DegenerateTrainingSet(format!(
                "need at least 2 examples per class, got {positives} positive and {negatives} negative"
            )));
        }

        let active: Vec<[usize; 12]> = examples
            .iter()
            .map(|(bm, _)| Metric::ALL.map(|m| feature_index(m, bm.get(m))))
            .collect();
        let n = examples.len() as f64;
        let mut w = vec![0.0; FEATURE_COUNT];
        let mut grad = vec![0.0; FEATURE_COUNT];

        for _ in 0..opts.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (features, (_, y)) in active.iter().zip(examples) {
                let z: f64 = features.iter().map(|&f| w[f]).sum::<f64>() + w[BIAS];
                let err = sigmoid(z) - if *y { 1.0 } else { 0.0 };
                for &f in features {
                    grad[f] += err;
                }
                grad[BIAS] += err;
            }
            for (i, (wi, gi)) in w.iter_mut().zip(&grad).enumerate() {
                let reg = if i == BIAS { 0.0 } else { opts.l2 * *wi };
                *wi -= opts.learning_rate * (gi / n + reg);
            }
        }
        Ok(Self {
            weights: w,
            trained: true,
        })
    }
}

fn feature_index(metric: Metric, bucket: Bucket) -> usize {
    metric.index() * Bucket::ALL.len() + bucket.index()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEVELS: [Bucket; 5] = [
        Bucket::VeryLow,
        Bucket::Low,
        Bucket::Medium,
        Bucket::High,
        Bucket::VeryHigh,
    ];

    /// Buggy exactly when la is VERY_HIGH; other metrics cycle through levels.
    fn separable_set() -> Vec<(BucketedMetrics, bool)> {
        (0..200)
            .map(|i| {
                let buggy = i % 4 == 0;
                let la = if buggy { Bucket::VeryHigh } else { LEVELS[i % 4] };
                let mut bm = BucketedMetrics([Bucket::Unknown; 12]).with(Metric::La, la);
                for m in &Metric::ALL[1..] {
                    bm = bm.with(*m, LEVELS[(i * (m.index() + 3) / 2) % 5]);
                }
                (bm, buggy)
            })
            .collect()
    }

    #[test]
    fn feature_vector_length() {
        assert_eq!(FEATURE_COUNT, 73);
        assert_eq!(BaselineModel::untrained().weights().len(), 73);
        assert!(BaselineModel::from_weights(vec![0.0; 72]).is_err());
    }

    #[test]
    fn zero_weights_give_one_half() {
        let m = BaselineModel::untrained();
        assert_eq!(m.predict(&BucketedMetrics::all_unknown()), 0.5);
    }

    #[test]
    fn bias_only_logit() {
        let mut w = vec![0.0; FEATURE_COUNT];
        w[BIAS] = 2.0;
        let m = BaselineModel::from_weights(w).unwrap();
        let p = m.predict(&BucketedMetrics::all_unknown());
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.880_797_077_977_882_3).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separable_training_accuracy() {
        let data = separable_set();
        let model = BaselineModel::train(&data, &TrainOptions::default()).unwrap();
        let correct = data.iter().filter(|(bm, y)| (model.predict(bm) >= 0.5) == *y).count();
        assert_eq!(correct, data.len());

        // Moving la to VERY_HIGH never lowers the probability.
        for (bm, _) in &data {
            let base = model.predict(bm);
            let raised = model.predict(&bm.with(Metric::La, Bucket::VeryHigh));
            assert!(raised >= base);
        }
    }

    #[test]
    fn flipped_labels_negate_weights() {
        let data = separable_set();
        let flipped: Vec<_> = data.iter().map(|(bm, y)| (*bm, !*y)).collect();
        let opts = TrainOptions::default();
        let a = BaselineModel::train(&data, &opts).unwrap();
        let b = BaselineModel::train(&flipped, &opts).unwrap();
        for (wa, wb) in a.weights().iter().zip(b.weights()) {
            assert!((wa + wb).abs() < 1e-6, "{wa} vs {wb}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<_> = separable_set().into_iter().map(|(bm, _)| (bm, true)).collect();
        assert!(matches!(
            BaselineModel::train(&data, &TrainOptions::default()),
            Err(ScoreError::DegenerateTrainingSet(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable_set();
        let opts = TrainOptions {
            iterations: 300,
            ..TrainOptions::default()
        };
        assert_eq!(
            BaselineModel::train(&data, &opts).unwrap(),
            BaselineModel::train(&data, &opts).unwrap()
        );
    }

    #[test]
    fn json_round_trip() {
        let model = BaselineModel::train(
            &separable_set(),
            &TrainOptions {
                iterations: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: BaselineModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
        assert!(serde_json::from_str::<BaselineModel>(r#"{"weights":[0.5],"trained":true}"#).is_err());
    }
}
