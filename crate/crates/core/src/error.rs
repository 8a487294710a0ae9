use thiserror::Error;

/// Errors raised by the factorization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid unfolding mode {0} (expected 1, 2 or 3)")]
    InvalidMode(usize),

    #[error("degenerate site `{site}`: {reason}")]
    DegenerateSite { site: String, reason: String },

    #[error("temperature grid too coarse: only {0} distinct value(s) after rounding")]
    GridTooCoarse(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("temperature {0} does not fall on the temperature grid")]
    OffGrid(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite objective after sweep {sweep} ({context})")]
    NonFinite { sweep: usize, context: String },

    #[error("malformed input at line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
