//! Change metrics: extraction from diffs, quantile bucketing and the
//! special-token metric block placed at the head of structured input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::DiffDocument;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("metric {metric}: need at least {MIN_SAMPLES} finite samples, got {got}")]
    InsufficientSamples { metric: Metric, got: usize },
    #[error("calibration file line {line}: {reason}")]
    BadCalibration { line: usize, reason: String },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("metric {metric}: value {value} out of range")]
    InvalidValue { metric: Metric, value: f64 },
}

/// Minimum number of finite samples needed to fit one metric's cut points.
pub const MIN_SAMPLES: usize = 5;

/// The twelve change metrics, in metric-block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    La,
    Ld,
    Nf,
    Nd,
    Ns,
    Ent,
    Ndev,
    Age,
    Nuc,
    Exp,
    Rexp,
    Sexp,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::La,
        Metric::Ld,
        Metric::Nf,
        Metric::Nd,
        Metric::Ns,
        Metric::Ent,
        Metric::Ndev,
        Metric::Age,
        Metric::Nuc,
        Metric::Exp,
        Metric::Rexp,
        Metric::Sexp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Dataset column name.
    pub fn column(self) -> &'static str {
        match self {
            Metric::La => "la",
            Metric::Ld => "ld",
            Metric::Nf => "nf",
            Metric::Nd => "nd",
            Metric::Ns => "ns",
            Metric::Ent => "ent",
            Metric::Ndev => "ndev",
            Metric::Age => "age",
            Metric::Nuc => "nuc",
            Metric::Exp => "exp",
            Metric::Rexp => "rexp",
            Metric::Sexp => "sexp",
        }
    }

    /// Name used inside the metric token.
    pub fn token_name(self) -> &'static str {
        match self {
            Metric::La => "num_lines_added",
            Metric::Ld => "num_lines_deleted",
            Metric::Nf => "num_files_touched",
            Metric::Nd => "num_directories_touched",
            Metric::Ns => "num_subsystems_touched",
            Metric::Ent => "change_entropy",
            Metric::Ndev => "num_developers_touched_files",
            Metric::Age => "time_from_last_change",
            Metric::Nuc => "num_changes_in_files",
            Metric::Exp => "author_experience",
            Metric::Rexp => "author_recent_experience",
            Metric::Sexp => "author_subsystem_experience",
        }
    }

    /// Whether the metric can be derived from the diff alone.
    pub fn is_diff_derived(self) -> bool {
        self.index() <= Metric::Ent.index()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Metric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.column() == s || m.token_name() == s)
            .ok_or_else(|| MetricsError::UnknownMetric(s.to_string()))
    }
}

/// Metric values for one change; `None` is Unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeMetrics {
    values: [Option<f64>; 12],
}

impl ChangeMetrics {
    pub fn unknown() -> Self {
        Self::default()
    }

    pub fn from_values(values: [f64; 12]) -> Self {
        Self {
            values: values.map(Some),
        }
    }

    pub fn get(&self, metric: Metric) -> Option<f64> {
        self.values[metric.index()]
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        self.values[metric.index()] = value;
    }

    pub fn with(mut self, metric: Metric, value: f64) -> Self {
        self.set(metric, Some(value));
        self
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Overlay every known value of `other` onto `self`.
    pub fn merge(&mut self, other: &ChangeMetrics) {
        for m in Metric::ALL {
            if let Some(v) = other.get(m) {
                self.set(m, Some(v));
            }
        }
    }

    /// Parse a map keyed by column or token name. Values must be finite and
    /// non-negative, and entropy must lie in `[0, 1]`.
    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, MetricsError> {
        let mut out = Self::unknown();
        for (key, &v) in map {
            let m: Metric = key.parse()?;
            let upper = if m == Metric::Ent { 1.0 } else { f64::INFINITY };
            if !v.is_finite() || v < 0.0 || v > upper {
                return Err(MetricsError::InvalidValue { metric: m, value: v });
            }
            out.set(m, Some(v));
        }
        Ok(out)
    }

    /// Known values keyed by column name.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        Metric::ALL
            .into_iter()
            .filter_map(|m| self.get(m).map(|v| (m.column().to_string(), v)))
            .collect()
    }
}

/// Diff-derived metrics. History metrics stay Unknown.
pub fn compute_diff_metrics(doc: &DiffDocument) -> ChangeMetrics {
    let la: usize = doc.files.iter().map(|f| f.added_lines.len()).sum();
    let ld: usize = doc.files.iter().map(|f| f.removed_lines.len()).sum();
    let nf = doc.files.len();
    let dirs: BTreeSet<&str> = doc.files.iter().map(|f| directory_of(&f.path)).collect();
    let subsystems: BTreeSet<&str> = doc.files.iter().map(|f| subsystem_of(&f.path)).collect();
    let changed: Vec<usize> = doc.files.iter().map(|f| f.changed_lines()).collect();

    ChangeMetrics::unknown()
        .with(Metric::La, la as f64)
        .with(Metric::Ld, ld as f64)
        .with(Metric::Nf, nf as f64)
        .with(Metric::Nd, dirs.len() as f64)
        .with(Metric::Ns, subsystems.len() as f64)
        .with(Metric::Ent, change_entropy(&changed))
}

/// Shannon entropy of the changed-line distribution, normalized by
/// `log2(files)`. Zero for one file or no changed lines.
pub fn change_entropy(changed_per_file: &[usize]) -> f64 {
    let n = changed_per_file.len();
    let total: usize = changed_per_file.iter().sum();
    if n <= 1 || total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let h: f64 = changed_per_file
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    (h / (n as f64).log2()).clamp(0.0, 1.0)
}

/// Parent directory; root-level files belong to `""`.
fn directory_of(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(dir, _)| dir)
}

/// First path segment; root-level files belong to `""`.
fn subsystem_of(path: &str) -> &str {
    path.split_once('/').map_or("", |(first, _)| first)
}

/// Five quantile levels plus Unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Bucket {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
    Unknown,
}

impl Bucket {
    pub const ALL: [Bucket; 6] = [
        Bucket::VeryLow,
        Bucket::Low,
        Bucket::Medium,
        Bucket::High,
        Bucket::VeryHigh,
        Bucket::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::VeryLow => "VERY_LOW",
            Bucket::Low => "LOW",
            Bucket::Medium => "MEDIUM",
            Bucket::High => "HIGH",
            Bucket::VeryHigh => "VERY_HIGH",
            Bucket::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ascending cut points of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cuts {
    pub q20: f64,
    pub q40: f64,
    pub q60: f64,
    pub q80: f64,
}

impl Cuts {
    pub fn new(q20: f64, q40: f64, q60: f64, q80: f64) -> Option<Self> {
        let ok = [q20, q40, q60, q80].iter().all(|v| v.is_finite()) && q20 <= q40 && q40 <= q60 && q60 <= q80;
        ok.then_some(Self { q20, q40, q60, q80 })
    }
}

/// `value < q20` is VERY_LOW, `< q40` LOW, `< q60` MEDIUM, `< q80` HIGH,
/// anything else VERY_HIGH. Ties go to the upper level.
pub fn bucketize(value: Option<f64>, cuts: &Cuts) -> Bucket {
    match value {
        None => Bucket::Unknown,
        Some(v) if v.is_nan() => Bucket::Unknown,
        Some(v) if v < cuts.q20 => Bucket::VeryLow,
        Some(v) if v < cuts.q40 => Bucket::Low,
        Some(v) if v < cuts.q60 => Bucket::Medium,
        Some(v) if v < cuts.q80 => Bucket::High,
        Some(_) => Bucket::VeryHigh,
    }
}

/// Nearest-rank percentile of sorted data.
fn nearest_rank(sorted: &[f64], pct: usize) -> f64 {
    let rank = (pct * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Cut points fitted from a sample of one metric.
pub fn fit_cuts(metric: Metric, samples: &[f64]) -> Result<Cuts, MetricsError> {
    let mut finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < MIN_SAMPLES {
        return Err(MetricsError::InsufficientSamples {
            metric,
            got: finite.len(),
        });
    }
    finite.sort_by(f64::total_cmp);
    Ok(Cuts {
        q20: nearest_rank(&finite, 20),
        q40: nearest_rank(&finite, 40),
        q60: nearest_rank(&finite, 60),
        q80: nearest_rank(&finite, 80),
    })
}

/// Per-metric cut points, persisted as a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketThresholds {
    cuts: [Cuts; 12],
}

const CALIBRATION_HEADER: &str = "drs-calibration v1";

impl BucketThresholds {
    pub fn new(cuts: [Cuts; 12]) -> Self {
        Self { cuts }
    }

    pub fn cuts(&self, metric: Metric) -> &Cuts {
        &self.cuts[metric.index()]
    }

    pub fn bucketize(&self, metrics: &ChangeMetrics) -> BucketedMetrics {
        BucketedMetrics(Metric::ALL.map(|m| bucketize(metrics.get(m), self.cuts(m))))
    }

    /// Text form: a version line, then `name,q20,q40,q60,q80` per metric.
    pub fn to_calibration_string(&self) -> String {
        let mut out = String::from(CALIBRATION_HEADER);
        out.push('\n');
        for m in Metric::ALL {
            let c = self.cuts(m);
            out.push_str(&format!("{},{},{},{},{}\n", m.column(), c.q20, c.q40, c.q60, c.q80));
        }
        out
    }

    pub fn from_calibration_str(text: &str) -> Result<Self, MetricsError> {
        let bad = |line: usize, reason: String| MetricsError::BadCalibration { line, reason };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, CALIBRATION_HEADER)) => {}
            Some((n, other)) => return Err(bad(n, format!("unsupported header {other:?}"))),
            None => return Err(bad(1, "empty calibration file".into())),
        }
        let mut cuts: [Option<Cuts>; 12] = [None; 12];
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(bad(n, format!("expected 5 fields, found {}", fields.len())));
            }
            let metric: Metric = fields[0].parse().map_err(|e: MetricsError| bad(n, e.to_string()))?;
            let mut q = [0.0; 4];
            for (slot, raw) in q.iter_mut().zip(&fields[1..]) {
                *slot = raw.parse().map_err(|_| bad(n, format!("not a number: {raw:?}")))?;
            }
            let c = Cuts::new(q[0], q[1], q[2], q[3])
                .ok_or_else(|| bad(n, "cut points must be finite and ascending".into()))?;
            if cuts[metric.index()].replace(c).is_some() {
                return Err(bad(n, format!("duplicate record for {metric}")));
            }
        }
        let mut out = [Cuts::new(0.0, 0.0, 0.0, 0.0).expect("zero cuts"); 12];
        for m in Metric::ALL {
            out[m.index()] = cuts[m.index()].ok_or_else(|| bad(0, format!("missing record for {m}")))?;
        }
        Ok(Self { cuts: out })
    }
}

/// Fit cut points for all twelve metrics; `samples` is indexed by
/// [`Metric::index`].
pub fn fit_bucket_thresholds(samples: &[Vec<f64>; 12]) -> Result<BucketThresholds, MetricsError> {
    let mut cuts = [Cuts::new(0.0, 0.0, 0.0, 0.0).expect("zero cuts"); 12];
    for m in Metric::ALL {
        cuts[m.index()] = fit_cuts(m, &samples[m.index()])?;
    }
    Ok(BucketThresholds { cuts })
}

/// Bucket levels for the twelve metrics in metric-block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BucketedMetrics(pub [Bucket; 12]);

impl BucketedMetrics {
    pub fn all_unknown() -> Self {
        Self([Bucket::Unknown; 12])
    }

    pub fn get(&self, metric: Metric) -> Bucket {
        self.0[metric.index()]
    }

    pub fn with(mut self, metric: Metric, bucket: Bucket) -> Self {
        self.0[metric.index()] = bucket;
        self
    }
}

/// The twelve `[<metric_name>:] [<LEVEL>]` lines.
pub fn render_metric_tokens(bm: &BucketedMetrics) -> String {
    Metric::ALL
        .iter()
        .map(|&m| format!("[{}:] [{}]", m.token_name(), bm.get(m)))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::FileDelta;

    fn file(path: &str, added: usize, removed: usize) -> FileDelta {
        FileDelta {
            path: path.into(),
            added_lines: vec!["+".into(); added],
            removed_lines: vec!["-".into(); removed],
            ..FileDelta::default()
        }
    }

    #[test]
    fn empty_doc_metrics() {
        let m = compute_diff_metrics(&DiffDocument::default());
        for metric in [Metric::La, Metric::Ld, Metric::Nf, Metric::Nd, Metric::Ns, Metric::Ent] {
            assert_eq!(m.get(metric), Some(0.0), "{metric}");
        }
        for metric in [
            Metric::Ndev,
            Metric::Age,
            Metric::Nuc,
            Metric::Exp,
            Metric::Rexp,
            Metric::Sexp,
        ] {
            assert_eq!(m.get(metric), None, "{metric}");
        }
    }

    #[test]
    fn two_equal_files_in_one_directory() {
        let doc = DiffDocument::new(vec![file("a/x.c", 5, 0), file("a/y.c", 5, 0)]);
        let m = compute_diff_metrics(&doc);
        assert_eq!(m.get(Metric::La), Some(10.0));
        assert_eq!(m.get(Metric::Nf), Some(2.0));
        assert_eq!(m.get(Metric::Nd), Some(1.0));
        assert_eq!(m.get(Metric::Ns), Some(1.0));
        assert_eq!(m.get(Metric::Ent), Some(1.0));
    }

    #[test]
    fn ninety_ten_entropy() {
        let doc = DiffDocument::new(vec![file("a/x.c", 9, 0), file("b/y.c", 1, 0)]);
        let m = compute_diff_metrics(&doc);
        let expected = -(0.9f64 * 0.9f64.log2() + 0.1f64 * 0.1f64.log2());
        assert!((m.get(Metric::Ent).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.468_995_593_589_281_2).abs() < 1e-12);
        assert_eq!(m.get(Metric::Nd), Some(2.0));
        assert_eq!(m.get(Metric::Ns), Some(2.0));
    }

    #[test]
    fn root_level_files_share_root_directory() {
        let doc = DiffDocument::new(vec![file("README", 1, 0), file("LICENSE", 1, 0), file("src/a", 1, 0)]);
        let m = compute_diff_metrics(&doc);
        assert_eq!(m.get(Metric::Nd), Some(2.0));
        assert_eq!(m.get(Metric::Ns), Some(2.0));
    }

    #[test]
    fn percentiles_of_one_to_hundred() {
        let samples: Vec<f64> = (1..=100).map(f64::from).collect();
        let c = fit_cuts(Metric::La, &samples).unwrap();
        assert_eq!(
            c,
            Cuts {
                q20: 20.0,
                q40: 40.0,
                q60: 60.0,
                q80: 80.0
            }
        );
    }

    #[test]
    fn constant_samples_bucket_to_very_high() {
        let c = fit_cuts(Metric::Ld, &[7.0; 5]).unwrap();
        assert_eq!(
            c,
            Cuts {
                q20: 7.0,
                q40: 7.0,
                q60: 7.0,
                q80: 7.0
            }
        );
        assert_eq!(bucketize(Some(7.0), &c), Bucket::VeryHigh);
        assert_eq!(bucketize(Some(6.9), &c), Bucket::VeryLow);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            fit_cuts(Metric::Age, &[1.0, 2.0, f64::NAN, 3.0, 4.0]),
            Err(MetricsError::InsufficientSamples {
                metric: Metric::Age,
                got: 4
            })
        );
    }

    #[test]
    fn strict_less_boundaries() {
        let c = Cuts::new(20.0, 40.0, 60.0, 80.0).unwrap();
        assert_eq!(bucketize(Some(-5.0), &c), Bucket::VeryLow);
        assert_eq!(bucketize(Some(20.0), &c), Bucket::Low);
        assert_eq!(bucketize(Some(40.0), &c), Bucket::Medium);
        assert_eq!(bucketize(Some(79.99), &c), Bucket::High);
        assert_eq!(bucketize(Some(80.0), &c), Bucket::VeryHigh);
        assert_eq!(bucketize(None, &c), Bucket::Unknown);
    }

    #[test]
    fn token_block_lines() {
        let bm = BucketedMetrics::all_unknown()
            .with(Metric::La, Bucket::Low)
            .with(Metric::Sexp, Bucket::VeryHigh);
        let text = render_metric_tokens(&bm);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "[num_lines_added:] [LOW]");
        assert_eq!(lines[6], "[num_developers_touched_files:] [UNKNOWN]");
        assert_eq!(lines[11], "[author_subsystem_experience:] [VERY_HIGH]");
    }

    #[test]
    fn calibration_file_round_trip_and_errors() {
        let mut samples: [Vec<f64>; 12] = Default::default();
        for (i, s) in samples.iter_mut().enumerate() {
            *s = (0..50).map(|v| (v * (i + 1)) as f64 / 3.0).collect();
        }
        let t = fit_bucket_thresholds(&samples).unwrap();
        let text = t.to_calibration_string();
        assert_eq!(text.lines().count(), 13);
        assert_eq!(BucketThresholds::from_calibration_str(&text).unwrap(), t);

        assert!(BucketThresholds::from_calibration_str("").is_err());
        assert!(BucketThresholds::from_calibration_str("drs-calibration v9\n").is_err());
        let missing: String = text.lines().take(12).map(|l| format!("{l}\n")).collect();
        assert!(BucketThresholds::from_calibration_str(&missing).is_err());
        let descending = text.replacen("la,", "la,9e9,", 1);
        assert!(BucketThresholds::from_calibration_str(&descending).is_err());
    }

    #[test]
    fn metric_names_parse_both_ways() {
        assert_eq!("la".parse::<Metric>().unwrap(), Metric::La);
        assert_eq!("author_recent_experience".parse::<Metric>().unwrap(), Metric::Rexp);
        assert!("loc".parse::<Metric>().is_err());
    }

    #[test]
    fn metric_map_accepts_both_spellings() {
        let mut map = BTreeMap::new();
        map.insert("ndev".to_string(), 3.0);
        map.insert("author_experience".to_string(), 12.0);
        let m = ChangeMetrics::from_map(&map).unwrap();
        assert_eq!(m.get(Metric::Ndev), Some(3.0));
        assert_eq!(m.get(Metric::Exp), Some(12.0));
        assert_eq!(m.get(Metric::La), None);

        map.insert("ent".to_string(), 1.5);
        assert!(matches!(
            ChangeMetrics::from_map(&map),
            Err(MetricsError::InvalidValue { .. })
        ));
        let mut bad = BTreeMap::new();
        bad.insert("lines".to_string(), 1.0);
        assert_eq!(
            ChangeMetrics::from_map(&bad),
            Err(MetricsError::UnknownMetric("lines".into()))
        );
    }
}
