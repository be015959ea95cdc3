use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("part {index} is not strictly positive ({value})")]
    NonPositivePart { index: usize, value: f64 },

    #[error("parts sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("a composition needs at least 2 parts, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot average an empty sample")]
    EmptySample,

    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },

    #[error("cosine is undefined for a zero-norm operand")]
    ZeroNormOperand,

    #[error("malformed balance tree: {0}")]
    MalformedTree(String),

    #[error("csv parse error at line {line}, column {column}: {detail}")]
    Parse {
        line: u64,
        column: usize,
        detail: String,
    },

    #[error("non-numeric value {value:?} in feature column {column:?} at line {line}")]
    NonNumericFeature {
        line: u64,
        column: String,
        value: String,
    },

    #[error("{0}: no data rows")]
    EmptyFile(PathBuf),

    #[error("column {0:?} not found")]
    MissingColumn(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("failed to spawn external model: {0}")]
    SpawnFailed(String),

    #[error("external model did not complete the handshake within {0} ms")]
    HandshakeTimeout(u64),

    #[error("external model did not answer request {id} within {timeout_ms} ms")]
    RequestTimeout { id: u64, timeout_ms: u64 },

    #[error("external model protocol error: {0}")]
    Protocol(String),

    #[error("external model exited (code {0:?})")]
    ChildExited(Option<i32>),

    #[error("exact estimation supports at most {max} features, got {got}")]
    TooManyFeaturesForExact { max: usize, got: usize },

    #[error("background sample is empty")]
    EmptyBackground,

    #[error("sample budget too small: {0}")]
    BudgetTooSmall(String),

    #[error("invalid figure dimensions: {0}")]
    InvalidDims(String),

    #[error("invalid explanation document: {0}")]
    InvalidDocument(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("{0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
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

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SpawnFailed(_)
            | Error::HandshakeTimeout(_)
            | Error::RequestTimeout { .. }
            | Error::Protocol(_)
            | Error::ChildExited(_)
            | Error::InvalidModel(_) => 3,
            Error::TooManyFeaturesForExact { .. } | Error::BudgetTooSmall(_) => 4,
            _ => 2,
        }
    }
}
