use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DissError> = std::result::Result<T, E>;

/// Failure of a single decision-maker query.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExpertError {
    #[error("option index {option} out of range for {count} options")]
    OptionOutOfRange { option: usize, count: usize },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("unparseable reply: {reason}")]
    Parse { reason: String, raw: String },
}

#[derive(Debug, Error)]
pub enum DissError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("non-binary label {value:?} at line {line}")]
    NonBinaryLabel { line: u64, value: String },
    #[error("label column {0} not found")]
    MissingLabelColumn(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("cannot fit a model on an empty sample set")]
    EmptySamples,
    #[error("model snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error("run aborted after {0} consecutive expert failures")]
    TooManyFailures(usize),
    #[error("evaluation invalid: {failed} of {total} expert queries failed")]
    EvaluationInvalid { failed: usize, total: usize },
    #[error("csv schema mismatch: {0}")]
    Schema(String),
    #[error("no completed seeds to aggregate")]
    NoCompletedSeeds,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DissError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        DissError::InvalidConfig { field: field.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DissError::Io { path: path.into(), source }
    }
}
