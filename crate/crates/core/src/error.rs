use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown label {token:?} at row {row}")]
    UnknownLabel { row: usize, token: String },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("ragged data: row {row} has {found} features, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has zero features")]
    ZeroDimensionality,

    #[error("sample {row} has no label")]
    Unlabeled { row: usize },

    #[error("dataset contains a single class ({0}); both classes are required")]
    SingleClass(crate::Vote),

    #[error("cannot split {samples} samples into {folds} folds")]
    InvalidFolds { folds: usize, samples: usize },

    #[error("dimensionality mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("all agent profiles are zero; voting weights are undefined")]
    DegenerateProfiles,

    #[error("agent index {index} out of range for {len} agents")]
    AgentIndex { index: usize, len: usize },

    #[error("margin {0} outside [-1, 1]")]
    MarginOutOfRange(f64),

    #[error("agent {agent} failed to train: {source}")]
    AgentTraining {
        agent: String,
        #[source]
        source: Box<Error>,
    },

    #[error("CSV error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("unsupported bundle format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },

    #[error("corrupted bundle: {0}")]
    CorruptBundle(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for problems caused by user-supplied data or files, as opposed to
    /// configuration or internal failures.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::UnknownLabel { .. }
            | Error::NonFinite { .. }
            | Error::Ragged { .. }
            | Error::EmptyDataset
            | Error::ZeroDimensionality
            | Error::Unlabeled { .. }
            | Error::SingleClass(_)
            | Error::InvalidFolds { .. }
            | Error::DimensionMismatch { .. }
            | Error::Csv { .. }
            | Error::UnsupportedVersion { .. }
            | Error::CorruptBundle(_)
            | Error::Io { .. } => true,
            Error::AgentTraining { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}
