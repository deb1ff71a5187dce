//! Unified diff parsing and commit structuring.
//!
//! [`parse_unified_diff`] turns git-style unified diff text into a
//! [`DiffDocument`]: one [`FileDelta`] per file section with the added and
//! removed body lines. [`structure_commit`] serializes a commit into the
//! tagged long-context text consumed by the scorers, and
//! [`truncate_to_budget`] enforces the sequence budget on it.

mod parse;
mod structure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse_unified_diff;
pub use structure::{
    check_well_formed, parse_structured, structure_commit, truncate_to_budget, CountingRule, StructuredCommit,
    StructuredFile, StructuredText, DEFAULT_BUDGET,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffError {
    #[error("malformed diff: no file header found")]
    MalformedDiff,
    #[error("budget of {budget} units is smaller than the protected prefix ({prefix} units)")]
    BudgetTooSmall { budget: usize, prefix: usize },
    #[error("invalid commit sha {0:?}: expected 40 lowercase hex characters")]
    InvalidSha(String),
    #[error("structured text is not well formed: {0}")]
    IllFormed(String),
}

/// A single commit as received from a hosting service or a dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    /// `owner/name`
    pub repo: String,
    /// Empty when unknown (manual submissions).
    pub sha: String,
    /// Unix seconds.
    pub author_timestamp: i64,
    pub message: String,
    pub raw_diff: String,
}

impl Commit {
    pub fn new(
        repo: impl Into<String>,
        sha: impl Into<String>,
        author_timestamp: i64,
        message: impl Into<String>,
        raw_diff: impl Into<String>,
    ) -> Result<Self, DiffError> {
        let sha = sha.into();
        if !sha.is_empty() && !is_full_sha(&sha) {
            return Err(DiffError::InvalidSha(sha));
        }
        Ok(Self {
            repo: repo.into(),
            sha,
            author_timestamp,
            message: message.into(),
            raw_diff: raw_diff.into(),
        })
    }

    /// A commit with only a message and a diff, as submitted by hand.
    pub fn manual(message: impl Into<String>, raw_diff: impl Into<String>) -> Self {
        Self {
            repo: String::new(),
            sha: String::new(),
            author_timestamp: 0,
            message: message.into(),
            raw_diff: raw_diff.into(),
        }
    }
}

/// True for a 40 character lowercase hex string.
pub fn is_full_sha(sha: &str) -> bool {
    sha.len() == 40 && sha.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// Changes to one file. Binary files carry empty line lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDelta {
    pub path: String,
    /// Source path of a rename or copy.
    pub old_path: Option<String>,
    pub added_lines: Vec<String>,
    pub removed_lines: Vec<String>,
    pub is_binary: bool,
}

impl FileDelta {
    pub fn new(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            ..Self::default()
        }
    }

    pub fn changed_lines(&self) -> usize {
        self.added_lines.len() + self.removed_lines.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffDocument {
    pub files: Vec<FileDelta>,
    /// Lines that could not be attributed to any known diff construct.
    #[serde(default)]
    pub warnings: usize,
}

impl DiffDocument {
    pub fn new(files: Vec<FileDelta>) -> Self {
        Self { files, warnings: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}
