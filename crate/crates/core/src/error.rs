use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Schur complement of the new block is not positive definite (pivot {pivot}); the inserted samples are degenerate")]
    SchurNotPositiveDefinite { pivot: usize },

    #[error("removed sub-block is numerically singular (condition estimate {condition:e})")]
    SingularSubBlock { condition: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid capacity {capacity} for {classes} classes: {reason}")]
    InvalidCapacity {
        capacity: usize,
        classes: usize,
        reason: &'static str,
    },

    #[error("class {class} exceeds its quota of {quota} slots while the bank is warming up")]
    ClassOverflow { class: usize, quota: usize },

    #[error("class id {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("memory bank is empty")]
    EmptyBank,

    #[error("smoothing policy requires an aggregate prediction")]
    MissingAggregate,

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("not enough memory: need about {required_bytes} bytes, {available_bytes} available; reduce the bank size")]
    OutOfMemory {
        required_bytes: u64,
        available_bytes: u64,
    },

    #[error("incremental and direct inverses disagree: max relative error {error:e} exceeds {tolerance:e}")]
    BenchMismatch { error: f64, tolerance: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: invalid label {label}{}", path.display(), classes.map(|c| format!(" (expected -1 or 0..{c})")).unwrap_or_default())]
    InvalidLabel {
        path: PathBuf,
        line: usize,
        label: i64,
        classes: Option<usize>,
    },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
