use thiserror::Error;

pub type Result<T> = std::result::Result<T, GpsError>;

/// Errors produced by the library.
///
/// Variants fall into three families (input, numerical, internal) which the
/// command-line front end maps onto distinct exit codes.
#[derive(Debug, Error)]
pub enum GpsError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("non-numeric value {value:?} at row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("predictor `{0}` has zero variance after centering")]
    ZeroVariance(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("least squares is not identifiable ({0}); use aicc or gcv, which do not need an error variance")]
    RankDeficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("replicate {replicate} (seed {seed}) failed: {source}")]
    Replicate {
        replicate: usize,
        seed: u64,
        #[source]
        source: Box<GpsError>,
    },
}

/// Broad classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
    Internal,
}

impl GpsError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GpsError::Io { .. }
            | GpsError::Csv { .. }
            | GpsError::MissingColumn(_)
            | GpsError::NonNumeric { .. }
            | GpsError::NonFinite { .. }
            | GpsError::TooFewRows { .. }
            | GpsError::ZeroVariance(_)
            | GpsError::DimensionMismatch { .. }
            | GpsError::InvalidParameter(_) => ErrorKind::Input,
            GpsError::RankDeficient(_) | GpsError::Numerical(_) | GpsError::Degenerate(_) => {
                ErrorKind::Numerical
            }
            GpsError::Internal(_) => ErrorKind::Internal,
            GpsError::Replicate { source, .. } => source.kind(),
        }
    }
}
