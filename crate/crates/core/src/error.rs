use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("target at {position:.3} bins lies beyond the {retained} retained range bins")]
    TargetOutOfWindow { position: f64, retained: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("bin window [{start}, {end}) exceeds profile length {len}")]
    WindowOutOfBounds {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("degenerate feature vector: {0}")]
    DegenerateFeature(&'static str),

    #[error("invalid layer dimensions {0:?}")]
    InvalidDims(Vec<usize>),

    #[error("label {label} outside [0, {classes})")]
    InvalidLabel { label: usize, classes: usize },

    #[error("batch of {0} rows is too small for batch-normalization statistics")]
    BatchTooSmall(usize),

    #[error("gradient shapes do not match the parameters")]
    ShapeMismatch,

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("unknown condition `{0}`")]
    UnknownCondition(String),

    #[error("fingerprint mismatch: {0} vs {1}")]
    FingerprintMismatch(String, String),

    #[error("malformed dataset: {0}")]
    MalformedDataset(String),

    #[error("confidence {0} outside [0, 1]")]
    ConfidenceOutOfRange(f64),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
