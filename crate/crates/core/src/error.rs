use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the gait-index pipeline.
#[derive(Debug, Error)]
pub enum GaitError {
    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("histogram has no nonzero bin")]
    EmptyHistogram,

    #[error("invalid histogram dimensions {rows}x{cols}")]
    InvalidDimensions { rows: usize, cols: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("training dataset is empty")]
    EmptyDataset,

    #[error("loss history has {len} epochs, window needs {window}")]
    HistoryTooShort { len: usize, window: usize },

    #[error("version mismatch: {0}")]
    VersionMismatch(String),

    #[error("measure `{0}` has zero mean over the training set")]
    ZeroMeanMeasure(&'static str),

    #[error("scored set needs both normal and abnormal samples")]
    SingleClass,

    #[error("segment length {delta} exceeds sequence length {len}")]
    SegmentTooLong { delta: usize, len: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GaitError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GaitError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        GaitError::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, GaitError>;
