//! Experiment runner: builds learned and classic structures from a
//! [`BenchConfig`], measures them and assembles a [`BenchReport`].
//!
//! Every experiment runs `trials` independent trials, in parallel, with
//! `seed_i = rng_seed + i`. All structural metrics (steps, depths, levels)
//! are deterministic in the seed; only the wall-clock fields vary between
//! runs. Aggregates are medians over trials.

mod config;
mod report;
mod run;

use thiserror::Error;

pub use config::{parse_pairs, Assignment, BenchConfig, Experiment, OutputFormat};
pub use report::{emit_report, median, write_report, Aggregate, BenchReport, TrialMetrics, WindowMetrics};
pub use run::{
    ellipsoid_samples, kd_dataset, run_bench, run_kdtree_bench, run_robustness_bench, run_skiplist_bench,
    synthetic_trace, KdDataset,
};

#[derive(Debug, Error)]
pub enum BenchError {
    /// Invalid or incomplete configuration.
    #[error("config error: {0}")]
    Config(String),
    /// Reading inputs or writing outputs failed.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// An input file was readable but malformed.
    #[error("input error: {0}")]
    Input(String),
    /// A window selected nothing.
    #[error("empty window: {0}")]
    EmptyWindow(String),
}

impl BenchError {
    /// Whether the failure comes from the configuration rather than the
    /// environment.
    pub fn is_config(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::EmptyWindow(_))
    }
}

impl From<crate::workload::WorkloadError> for BenchError {
    fn from(e: crate::workload::WorkloadError) -> Self {
        use crate::workload::WorkloadError as W;
        match e {
            W::Io(io) => BenchError::Io(io),
            W::EmptyWindow(w) => BenchError::EmptyWindow(w),
            W::Parse { .. } | W::EmptyTrace | W::BadPoint { .. } => BenchError::Input(e.to_string()),
            other => BenchError::Config(other.to_string()),
        }
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Io(e.into())
    }
}
