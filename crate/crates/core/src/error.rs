use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: row {row} has {found} values but the wavenumber axis has {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("wavenumber axis is not strictly increasing at index {index} ({previous} then {value})")]
    NonIncreasingAxis {
        index: usize,
        previous: f64,
        value: f64,
    },

    #[error("invalid wavenumber axis: {0}")]
    InvalidAxis(String),

    #[error("wavenumber axes differ at index {index}")]
    AxisMismatch { index: usize },

    #[error("region {name} [{lo}, {hi}] selects no points of the axis")]
    EmptyRegion { name: String, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("labels must contain both classes ({0})")]
    SingleClass(String),

    #[error("cross-validation fold {fold} is missing class {missing}")]
    FoldMissingClass { fold: usize, missing: u8 },

    #[error("requested {requested} principal components but the data has rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("input length {length} is shorter than the minimum {minimum} admitted by the network")]
    InputTooShort { length: usize, minimum: usize },

    #[error("non-finite training loss at epoch {epoch}, batch {batch} (first non-finite layer: {layer})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        layer: String,
    },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
