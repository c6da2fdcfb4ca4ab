//! End-to-end experiments: task generation, task selection, meta-training,
//! the supervised baseline, A* evaluation, metrics tables and plots.

pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod plots;
pub mod study;
pub mod taskio;

use std::path::PathBuf;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use metrics::{aggregate_table, evaluate, EvalHeuristic, MetricsRow, TableEntry, METRICS_HEADER};
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use study::{task_addition_study, AdditionStudy};
pub use taskio::{LoadedTask, TaskDir};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message} (state saved in {state})")]
    Stage { stage: String, message: String, state: PathBuf },
    #[error("instance {instance} of {domain} has no blind baseline row")]
    MissingBaseline { domain: String, instance: String },
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Learn(#[from] metaplan_learn::LearnError),
    #[error(transparent)]
    Nn(#[from] metaplan_nn::NnError),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 for failed stages.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn write_file(path: &std::path::Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}
