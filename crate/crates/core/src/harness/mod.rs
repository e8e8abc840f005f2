//! Seeded Monte-Carlo experiments: single runs, sweeps and result tables.

mod config;
mod run;
mod sweep;
mod table;

pub use config::{ExperimentConfig, InstanceMode};
pub use run::{estimate_round_means, run_single, run_single_with, AuditSnapshot, RunTrajectory};
pub use sweep::{cell_seed, run_cell, sweep, CellResult};
pub use table::{read_table, write_atomic, write_table, RegretRow, RegretTable, CSV_HEADER};

use std::path::PathBuf;
use thiserror::Error;

use crate::policies::PolicyError;
use crate::rewards::InstanceError;
use crate::welfare::WelfareError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Welfare(#[from] WelfareError),
    #[error("trajectory horizons differ: expected {expected}, found {found}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("no trajectories to aggregate")]
    NoRuns,
    #[error("trajectory was recorded without audit snapshots")]
    MissingAudit,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed results file at line {line}: {message}")]
    Parse { line: u64, message: String },
}

impl HarnessError {
    /// True for persistence failures, as opposed to configuration or
    /// computation failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io { .. } | Self::Parse { .. })
    }
}
