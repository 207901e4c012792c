//! Experiment harness for the `dla-core` simulator.
//!
//! Runs seeded trial batches in parallel (results never depend on the
//! worker count), summarizes them against the closed-form predictions,
//! persists per-trial records as versioned CSV or JSON lines, and hosts the
//! acceptance suite behind `dla validate`.

use std::path::Path;

use dla_core::{AnalyticsError, EngineError, ModelError, OracleError};

pub mod config;
pub mod experiment;
pub mod records;
pub mod summary;
pub mod validate;

pub use config::{ExperimentConfig, Format, Mode, ModelJson, OutputSpec};
pub use experiment::{compare_to_oracle, run_experiment, Experiment, OracleComparison};
pub use records::TrialRecord;
pub use summary::{summarize, SweepSummary};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed record file: {0}")]
    Format(String),
    #[error("no trial records to summarize")]
    EmptyRecords,
    #[error("{0} trial(s) did not finish")]
    Unfinished(u64),
    #[error("occupancy invariant broken in trial with seed {seed} at step {t}")]
    InvariantViolation { seed: u64, t: u64 },
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
