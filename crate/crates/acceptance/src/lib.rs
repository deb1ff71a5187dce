//! Deterministic fixture generators and brute-force reference oracles shared
//! by the acceptance suite and the committed fixture files.

pub mod fixtures;
pub mod oracle;

use std::path::PathBuf;

/// Repository `fixtures/` directory.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
