//! Running experiments: presets, settings files, seeds, repeats in
//! parallel, CSV output, and hyperparameter search.

pub mod io;
pub mod manifest;
pub mod preset;
pub mod runner;
pub mod search;
pub mod seeds;
pub mod settings;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::sim::SimError;

pub use manifest::RunManifest;
pub use preset::{preset, ExperimentPreset, Variant, PRESET_NAMES};
pub use runner::{aggregate_dir, run_plan, RunOptions, RunReport};
pub use search::{hyper_search, SearchOptions, SearchSpace, TrialResult};
pub use settings::{ExperimentPlan, Settings};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{label} repeat {repeat} diverged ({source}); snapshot written to {}", snapshot.display())]
    Numerical {
        label: String,
        repeat: usize,
        snapshot: PathBuf,
        #[source]
        source: SimError,
    },
    #[error("missing raw files:\n{}", list_paths(.0))]
    MissingRaw(Vec<PathBuf>),
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| format!("  {}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ExperimentError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for bad configuration, 3 for a diverged run,
    /// 4 for missing inputs, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Sim(SimError::Config(_)) => 2,
            ExperimentError::Numerical { .. } => 3,
            ExperimentError::MissingRaw(_) => 4,
            _ => 1,
        }
    }
}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(msg) => ExperimentError::Config(msg),
            other => ExperimentError::Sim(other),
        }
    }
}
