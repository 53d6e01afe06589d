use std::path::PathBuf;

/// Broad failure category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("non-numeric value {value:?} in column {column:?} at row {row}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("non-finite value in column {column:?} at row {row}")]
    NonFinite { row: usize, column: String },

    #[error("label column {0:?} not present in header")]
    MissingLabelColumn(String),

    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{p} features is too many for exhaustive enumeration (max {max})")]
    TooManyFeatures { p: usize, max: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("every sample is labelled as noise")]
    AllNoise,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::TooManyFeatures { .. } => ErrorKind::Config,
            Error::Numeric(_) | Error::Degenerate(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
