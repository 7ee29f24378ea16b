//! Experiment drivers, dataset preparation, checkpoints and CSV output.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]: re-running a
//! config reproduces its CSVs and checkpoints byte for byte. Wall-clock times
//! go to `run_info.json` only.

mod checkpoint;
mod config;
mod csv;
mod prepare;
mod run;

pub use checkpoint::{
    checkpoint_name, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint,
    Checkpoint, CheckpointError, NCCK_MAGIC, NCCK_VERSION,
};
pub use config::{
    hex, ArchitectureConfig, DataSource, DatasetConfig, ExperimentConfig, ExperimentKind, LrGrid,
    MetricsConfig, Schedule, SweepConfig, TransferConfig,
};
pub use csv::{
    metrics_header, write_metrics_csv, METRICS_COLUMNS, SWEEP_HEADER, TRANSFER_HEADER,
};
pub use prepare::{load_experiment_data, load_source, prepare_split, SourceSplits};
pub use run::{
    extract_features, measure, run_cascade_experiment, run_collapse_experiment, run_experiment,
    run_subset_sweep, run_transfer_experiment, spearman, sweep_member_config, CollapseOutcome, ExperimentOutcome,
    LayerSelector, SweepOutcome, SweepRow, TransferOutcome, TransferRow,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::collapse::CollapseError;
use crate::data::DataError;
use crate::network::NetworkError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Collapse(#[from] CollapseError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("training failed at iteration {iteration}: {error}{}", match .last_checkpoint {
        Some(p) => format!(" (last checkpoint {})", p.display()),
        None => String::new(),
    })]
    Training {
        error: NetworkError,
        iteration: u64,
        last_checkpoint: Option<PathBuf>,
    },
    #[error("data leakage: {count} source rows are in both the pretraining and fine-tuning sets (e.g. row {example})")]
    Leakage { count: usize, example: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// True for failures reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, HarnessError::Io { .. } | HarnessError::Data(DataError::Io { .. }))
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
