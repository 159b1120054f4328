//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by detectors, generators, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions are inconsistent or an input violates a shape
    /// precondition (e.g. a non-Hermitian matrix fed to the eigensolver).
    #[error("shape error: {0}")]
    ShapeError(String),

    /// A matrix that must have full (row) rank is numerically rank deficient.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// An iterative detector hit a rank failure mid-run.
    #[error("rank failure at iteration {iteration}")]
    IterationRankFailure { iteration: usize },

    /// Jammer synthesis asked for something impossible (zero-energy sequence
    /// with a finite power target, out-of-range UE index, ...).
    #[error("invalid jammer: {0}")]
    InvalidJammer(String),

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A channel file is malformed; `record` is the index of the offending
    /// record when known.
    #[error("channel file error{}: {msg}", record.map(|r| format!(" at record {r}")).unwrap_or_default())]
    ChannelFile { record: Option<u64>, msg: String },

    /// Training diverged (non-finite loss).
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
