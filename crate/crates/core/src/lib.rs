//! Diff risk scoring: unified diff parsing, commit structuring, change
//! metrics, pluggable scorers and gating evaluation.

pub mod diff;
pub mod eval;
pub mod metrics;
pub mod predict;
pub mod scoring;
