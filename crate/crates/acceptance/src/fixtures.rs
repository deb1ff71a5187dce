//! Constructed datasets and score distributions. Everything is a pure
//! function of its arguments so committed files can be regenerated and
//! compared byte for byte.

use drs_core::diff::Commit;
use drs_core::eval::{simulate_gate, top_k_count, write_dataset, Dataset, GatePolicy, GateReport, LabeledCommit};
use drs_core::metrics::{ChangeMetrics, Metric};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SEPARABLE_SEED: u64 = 7;
pub const SEPARABLE_ROWS: usize = 1000;

/// Rows where `la` alone decides the label: 1 line added for clean commits,
/// 1000 for buggy ones. About 30% buggy; timestamps strictly increase.
pub fn separable_dataset(rows: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = 1_500_000_000i64;
    Dataset::new(
        (0..rows)
            .map(|i| {
                let buggy = rng.random_bool(0.3);
                let mut metrics = ChangeMetrics::unknown();
                for m in Metric::ALL {
                    metrics.set(m, Some(1.0));
                }
                metrics.set(Metric::Ent, Some(0.0));
                metrics.set(Metric::La, Some(if buggy { 1000.0 } else { 1.0 }));
                LabeledCommit {
                    commit: Commit {
                        repo: "synthetic/separable".into(),
                        sha: format!("{:040x}", i + 1),
                        author_timestamp: start + 3600 * i as i64,
                        message: String::new(),
                        raw_diff: String::new(),
                    },
                    metrics,
                    buggy,
                }
            })
            .collect(),
    )
}

pub fn separable_csv() -> String {
    let mut out = Vec::new();
    write_dataset(&separable_dataset(SEPARABLE_ROWS, SEPARABLE_SEED), &mut out).expect("in-memory write");
    String::from_utf8(out).expect("csv is utf-8")
}

/// A score set built so that the top `k` percent holds exactly `captured`
/// of `buggy` buggy commits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTarget {
    pub name: &'static str,
    pub n: usize,
    pub buggy: usize,
    pub k: f64,
    pub captured: usize,
    pub seed: u64,
}

impl GateTarget {
    pub fn fraction(&self) -> f64 {
        self.captured as f64 / self.buggy as f64
    }
}

/// Recall@Top-30% = 108/125 = 0.864.
pub const TOP30: GateTarget = GateTarget {
    name: "gate-top30",
    n: 1000,
    buggy: 125,
    k: 30.0,
    captured: 108,
    seed: 30,
};

/// Recall@Top-5% = 63/200 = 0.315.
pub const TOP5: GateTarget = GateTarget {
    name: "gate-top5",
    n: 2000,
    buggy: 200,
    k: 5.0,
    captured: 63,
    seed: 5,
};

/// Recall@Top-10% = 503/1000 = 0.503.
pub const TOP10: GateTarget = GateTarget {
    name: "gate-top10",
    n: 10000,
    buggy: 1000,
    k: 10.0,
    captured: 503,
    seed: 10,
};

pub const GATE_TARGETS: [GateTarget; 3] = [TOP30, TOP5, TOP10];

/// Distinct scores in input order with the buggy commits placed at random
/// ranks inside and outside the gated head.
pub fn gate_distribution(t: &GateTarget) -> (Vec<f64>, Vec<bool>) {
    let head = top_k_count(t.n, t.k);
    assert!(
        t.captured <= head && t.buggy - t.captured <= t.n - head,
        "unreachable target"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    // labels_by_rank[r] is the label of the commit ranked r (0 = riskiest).
    let mut labels_by_rank = vec![false; t.n];
    for r in sample(&mut rng, head, t.captured) {
        labels_by_rank[r] = true;
    }
    for r in sample(&mut rng, t.n - head, t.buggy - t.captured) {
        labels_by_rank[head + r] = true;
    }
    // Shuffle input order so the file is not pre-sorted.
    let mut order: Vec<usize> = (0..t.n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let scores = order.iter().map(|&r| (t.n - r) as f64 / (t.n + 1) as f64).collect();
    let labels = order.iter().map(|&r| labels_by_rank[r]).collect();
    (scores, labels)
}

pub fn scores_csv(scores: &[f64], labels: &[bool]) -> String {
    let mut out = String::from("score,buggy\n");
    for (s, &y) in scores.iter().zip(labels) {
        out.push_str(&format!("{s},{}\n", u8::from(y)));
    }
    out
}

/// One case of the gating suite shared with other components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCase {
    pub name: String,
    pub policy: GatePolicy,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub expected: GateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedGateFixtures {
    /// How `top_percent` ranks commits: descending score, ties in input order,
    /// gated count `ceil(k/100 * n)` clamped to [1, n].
    pub rules: String,
    pub cases: Vec<GateCase>,
}

fn round_score(x: f64, levels: u32) -> f64 {
    (x * levels as f64).round() / levels as f64
}

/// Twenty cases covering ties, fractional k, both policy kinds and the
/// constructed Recall@Top-30% distribution.
pub fn shared_gate_fixtures() -> SharedGateFixtures {
    let mut cases = Vec::new();
    let mut push = |name: String, policy: GatePolicy, scores: Vec<f64>, labels: Vec<bool>| {
        let expected = simulate_gate(&scores, &labels, policy).expect("fixture inputs are valid");
        cases.push(GateCase {
            name,
            policy,
            scores,
            labels,
            expected,
        });
    };

    let (s, l) = gate_distribution(&TOP30);
    push("constructed-top30".into(), GatePolicy::TopPercent { k: 30.0 }, s, l);

    push(
        "all-tied-top50".into(),
        GatePolicy::TopPercent { k: 50.0 },
        vec![0.5; 6],
        vec![false, false, false, true, true, true],
    );
    push(
        "tau-zero-gates-all".into(),
        GatePolicy::FixedThreshold { tau: 0.0 },
        vec![0.0, 0.2, 0.9],
        vec![true, false, true],
    );
    push(
        "k100-captures-all".into(),
        GatePolicy::TopPercent { k: 100.0 },
        vec![0.1, 0.7, 0.3, 0.2],
        vec![true, false, false, true],
    );
    push(
        "tiny-k-gates-one".into(),
        GatePolicy::TopPercent { k: 0.01 },
        vec![0.2, 0.9, 0.4],
        vec![false, true, false],
    );
    push(
        "tau-equal-score-is-gated".into(),
        GatePolicy::FixedThreshold { tau: 0.5 },
        vec![0.5, 0.49, 0.51],
        vec![true, true, false],
    );
    push(
        "ceil-rounds-up".into(),
        GatePolicy::TopPercent { k: 30.0 },
        vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3],
        vec![false, false, true, true, false, false, false],
    );
    push(
        "no-buggy".into(),
        GatePolicy::TopPercent { k: 20.0 },
        vec![0.3, 0.1, 0.2, 0.9, 0.5],
        vec![false; 5],
    );

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ks = [5.0, 10.0, 12.5, 30.0, 33.3, 50.0, 66.7, 90.0];
    for (i, &k) in ks.iter().enumerate() {
        let n = rng.random_range(10..60);
        let levels = [4, 10, 1000][i % 3];
        let scores: Vec<f64> = (0..n).map(|_| round_score(rng.random::<f64>(), levels)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        push(
            format!("random-top{k}-n{n}"),
            GatePolicy::TopPercent { k },
            scores,
            labels,
        );
    }
    for tau in [0.25, 0.5, 0.75, 1.0] {
        let n = rng.random_range(10..60);
        let scores: Vec<f64> = (0..n).map(|_| round_score(rng.random::<f64>(), 8)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        push(
            format!("random-tau{tau}-n{n}"),
            GatePolicy::FixedThreshold { tau },
            scores,
            labels,
        );
    }

    SharedGateFixtures {
        rules: "descending score, ties keep input order; gated count ceil(k/100*n) clamped to [1, n]; \
                fixed threshold gates score >= tau"
            .into(),
        cases,
    }
}

pub fn shared_gate_json() -> String {
    serde_json::to_string_pretty(&shared_gate_fixtures()).expect("fixtures serialize") + "\n"
}

/// Relative path under `fixtures/` and contents of every generated fixture.
pub fn generated_files() -> Vec<(String, String)> {
    let mut files = vec![("eval/separable.csv".to_string(), separable_csv())];
    for t in GATE_TARGETS {
        let (s, l) = gate_distribution(&t);
        files.push((format!("eval/{}.csv", t.name), scores_csv(&s, &l)));
    }
    files.push(("gating/shared.json".into(), shared_gate_json()));
    files
}
