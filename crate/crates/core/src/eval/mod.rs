//! Batch evaluation: datasets, run manifests, offline scoring and reports.

mod dataset;
mod manifest;
mod report;
mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use dataset::{load_dataset, Dataset, LineError};
pub use manifest::{KgFiles, LlmSpec, RunManifest};
pub use report::{
    parse_report_csv, percent, report_render, Aggregate, EvalReport, ReportError, ReportFormat, ReportRow, RunInfo,
};
pub use run::{evaluate, score_offline, score_row, write_outputs, EvalRun, MaskSummary, ScoreRecord, OUTPUT_FILES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} has no valid records ({} rejected lines)", path.display(), errors.len())]
    EmptyDataset { path: PathBuf, errors: Vec<LineError> },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("referenced path does not exist: {}", .0.display())]
    MissingPath(PathBuf),
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("nothing to score in {}", .0.display())]
    NoWork(PathBuf),
    #[error("invalid report: {0}")]
    Report(String),
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}
