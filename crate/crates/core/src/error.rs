use std::path::PathBuf;

use thiserror::Error;

use crate::pairset::Side;

/// Why an image could not be decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeFailure {
    Unsupported,
    Truncated,
    ZeroDimension,
}

impl std::fmt::Display for DecodeFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DecodeFailure::Unsupported => f.write_str("unsupported format"),
            DecodeFailure::Truncated => f.write_str("truncated or corrupt file"),
            DecodeFailure::ZeroDimension => f.write_str("zero-dimension image"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("duplicate pair_id `{pair_id}` on rows {first_row} and {row}")]
    DuplicatePairId {
        pair_id: String,
        first_row: usize,
        row: usize,
    },

    #[error("{}: {kind}: {message}", path.display())]
    ImageDecode {
        path: PathBuf,
        kind: DecodeFailure,
        message: String,
    },

    #[error("image size mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    SizeMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("image {width}x{height} is smaller than the required {min_width}x{min_height}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("invalid image buffer: {0}")]
    InvalidImage(String),

    #[error("score cache row {row}: {message}")]
    CacheFormat { row: usize, message: String },

    #[error("conflicting score for ({pair_id}, {side}, {metric_id}): cached {existing}, new {incoming}{}", row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    CacheConflict {
        pair_id: String,
        side: Side,
        metric_id: String,
        existing: f64,
        incoming: f64,
        row: Option<usize>,
    },

    #[error("missing score for ({pair_id}, {side}, {metric_id})")]
    MissingScore {
        pair_id: String,
        side: Side,
        metric_id: String,
    },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("metric `{0}` is already registered")]
    DuplicateMetric(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("metric `{0}` is computed externally; import its scores with `ingest`")]
    ExternalMetric(String),

    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("only {selected} patches selected, at least {required} needed; use a larger pristine corpus")]
    InsufficientPatches { selected: usize, required: usize },

    #[error("pooled covariance is singular even after regularization")]
    SingularCovariance,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training data contains only one class")]
    SingleClass,

    #[error("non-finite feature value at sample {sample}, dimension {dim}")]
    NonFinite { sample: usize, dim: usize },

    #[error("cycle {cycle}: no split with both classes on each side after {attempts} attempts")]
    DegenerateSplit { cycle: usize, attempts: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Failures of the numerical pipeline, as opposed to bad or missing
    /// input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateSamples(_)
                | Error::InsufficientPatches { .. }
                | Error::SingularCovariance
                | Error::SingleClass
                | Error::NonFinite { .. }
                | Error::DegenerateSplit { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
