use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation pipeline and its front ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("non-numeric cell at ({row},{col}): {token:?}")]
    NonNumericCell { row: usize, col: usize, token: String },

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("insufficient rows: need at least 2, found {0}")]
    InsufficientRows(usize),

    #[error("no covariate columns")]
    NoCovariates,

    #[error("invalid y column {0:?}")]
    InvalidYColumn(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("basis has {k} terms which exceeds the cap of {cap}; lower the degree")]
    BasisTooLarge { k: u128, cap: usize },

    #[error("factorization of the shifted Gram matrix failed (non-finite design matrix?)")]
    Factorization,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("replication {rep} of cell {cell} failed: {source}")]
    Replication {
        cell: usize,
        rep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable short identifier for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "missing_file",
            Error::Io { .. } => "io",
            Error::NonNumericCell { .. } => "non_numeric_cell",
            Error::RaggedRow { .. } => "ragged_row",
            Error::InsufficientRows(_) => "insufficient_rows",
            Error::NoCovariates => "no_covariates",
            Error::InvalidYColumn(_) => "invalid_y_column",
            Error::NonFinite { .. } => "non_finite",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BasisTooLarge { .. } => "basis_too_large",
            Error::Factorization => "factorization",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Replication { .. } => "replication",
        }
    }

    /// Process exit code: 2 for input or validation problems, 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Factorization | Error::Io { .. } => 1,
            Error::Replication { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
