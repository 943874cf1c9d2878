//! Replicated experiments, aggregation, user × item sweeps and their CSV output.

mod checkpoint;
pub mod csv_io;
mod experiment;
mod gradcheck_suite;
mod series;
mod sweep;


use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::AgentError;
use crate::env::EnvError;
use crate::nn::NnError;

pub use checkpoint::{
    evaluate_checkpoint, load_checkpoint, save_checkpoint, AgentCheckpoint, AGENT_FILE, MODEL_FILE,
};
pub use experiment::{
    agent_seed, run_experiment, run_file_name, run_single, AgentKind, ExperimentConfig,
    ExperimentResult, TrainedAgent,
};
pub use gradcheck_suite::{gradcheck_suite, GradCheckCase, DEFAULT_TOLERANCE};
pub use series::{
    compare_ratio, final_score, moving_average, tail_len, AggregateSeries, CtrSeries, FinalScore,
    Ratio, MOVING_AVERAGE_WINDOW,
};
pub use sweep::{run_sweep, SweepConfig, SweepFailure, SweepGrid, SweepRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error("run with seed {seed} failed: {source}")]
    Run { seed: u64, source: AgentError },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}
