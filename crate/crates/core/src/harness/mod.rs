//! Experiment orchestration: datasets, run configuration, seeded training
//! runs, the `(t, c)` sweep, the annealing/substitution study and report
//! files.

pub mod config;
pub mod data;
pub mod grid;
pub mod idx;
pub mod report;
pub mod rng;
pub mod study;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{AnnealConfig, DatasetKind, DatasetSpec, GridConfig, TrainConfig};
pub use data::{load_dataset, Dataset, SplitData};
pub use grid::{run_grid, GridReport, GridRow};
pub use study::{run_substitution_study, SubstitutionStudy};
pub use train::{run_training, RunOutcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("runtime: {0}")]
    Runtime(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl HarnessError {
    /// Process exit code for the CLI: 1 config, 2 runtime/divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) => 2,
            HarnessError::Io { .. } | HarnessError::Format { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<crate::Error> for HarnessError {
    fn from(e: crate::Error) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;
