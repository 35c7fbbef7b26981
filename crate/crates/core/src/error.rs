use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("input contains no data")]
    EmptyInput,
    #[error("row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {col}: cannot parse {cell:?} as a number")]
    Parse { row: usize, col: usize, cell: String },
    #[error("row {row}, column {col}: non-finite value")]
    NonFinite { row: usize, col: usize },
    #[error("split of n = {n} with eta = {eta} leaves a block that is too small")]
    SplitTooSmall { n: usize, eta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("all points are identical; median heuristic bandwidth is infinite")]
    AllPointsIdentical,
    #[error("self-normalizer is zero (constant projected sequence)")]
    DegenerateNormalizer,
    #[error("every CUSUM self-normalizer V(k) is zero")]
    AllNormalizersZero,
    #[error("lag {lag} too large for series of length {n}")]
    LagTooLarge { lag: usize, n: usize },
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("quantile table not found: {0}")]
    NotFound(String),
    #[error("quantile table version {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("quantile table checksum mismatch in {0}")]
    ChecksumMismatch(String),
    #[error("malformed quantile table: {0}")]
    MalformedTable(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a degenerate statistic rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateNormalizer | Error::AllNormalizersZero | Error::AllPointsIdentical
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
