use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use super::EvalError;
use crate::diff::{is_full_sha, Commit};
use crate::metrics::{ChangeMetrics, Metric};

/// Header of the dataset CSV, in canonical order.
pub const DATASET_COLUMNS: [&str; 16] = [
    "commit_id",
    "project",
    "author_date",
    "buggy",
    "la",
    "ld",
    "nf",
    "nd",
    "ns",
    "ent",
    "ndev",
    "age",
    "nuc",
    "exp",
    "rexp",
    "sexp",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCommit {
    pub commit: Commit,
    pub metrics: ChangeMetrics,
    pub buggy: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<LabeledCommit>,
}

impl Dataset {
    pub fn new(rows: Vec<LabeledCommit>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.buggy).collect()
    }

    pub fn buggy_count(&self) -> usize {
        self.rows.iter().filter(|r| r.buggy).count()
    }

    /// Known values of every metric, indexed by [`Metric::index`].
    pub fn metric_samples(&self) -> [Vec<f64>; 12] {
        let mut out: [Vec<f64>; 12] = Default::default();
        for row in &self.rows {
            for m in Metric::ALL {
                if let Some(v) = row.metrics.get(m) {
                    out[m.index()].push(v);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Rows rejected for an unparseable id, timestamp, label or metric.
    pub skipped: usize,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LoadReport, EvalError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file)
}

pub fn read_dataset(reader: impl Read) -> Result<LoadReport, EvalError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| EvalError::Io(e.to_string()))?.clone();
    let mut index = [0usize; 16];
    for (slot, name) in index.iter_mut().zip(DATASET_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| EvalError::MissingColumn(name.to_string()))?;
    }

    let mut rows = Vec::new();
    let mut skipped = 0;
    for record in rdr.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(error = %e, "skipping unreadable dataset record");
                skipped += 1;
                continue;
            }
        };
        let field = |i: usize| record.get(index[i]).unwrap_or("");
        match parse_row(field) {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        tracing::warn!(skipped, "dataset rows skipped");
    }
    if rows.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(LoadReport {
        dataset: Dataset { rows },
        skipped,
    })
}

fn parse_row<'a>(field: impl Fn(usize) -> &'a str) -> Option<LabeledCommit> {
    let sha = field(0).to_ascii_lowercase();
    if !sha.is_empty() && !is_full_sha(&sha) {
        return None;
    }
    let author_timestamp = parse_timestamp(field(2))?;
    let buggy = parse_label(field(3))?;
    let mut metrics = ChangeMetrics::unknown();
    for (k, m) in Metric::ALL.into_iter().enumerate() {
        let v: f64 = field(4 + k).parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        metrics.set(m, Some(v));
    }
    Some(LabeledCommit {
        commit: Commit {
            repo: field(1).to_string(),
            sha,
            author_timestamp,
            message: String::new(),
            raw_diff: String::new(),
        },
        metrics,
        buggy,
    })
}

/// Unix seconds, RFC 3339, `YYYY-MM-DD HH:MM:SS` or a bare date.
fn parse_timestamp(raw: &str) -> Option<i64> {
    if let Ok(secs) = raw.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(secs) = raw.parse::<f64>() {
        return secs.is_finite().then_some(secs.floor() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S") {
        return Some(dt.and_utc().timestamp());
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_label(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

/// Write rows in the canonical column order. Unknown metrics are left empty.
pub fn write_dataset(ds: &Dataset, writer: impl Write) -> Result<(), EvalError> {
    let io = |e: csv::Error| EvalError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DATASET_COLUMNS).map_err(io)?;
    for row in &ds.rows {
        let mut record = vec![
            row.commit.sha.clone(),
            row.commit.repo.clone(),
            row.commit.author_timestamp.to_string(),
            if row.buggy { "1" } else { "0" }.to_string(),
        ];
        record.extend(
            Metric::ALL
                .iter()
                .map(|&m| row.metrics.get(m).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| EvalError::Io(e.to_string()))
}
