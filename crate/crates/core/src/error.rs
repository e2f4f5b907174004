use thiserror::Error;

/// Errors raised by the numerical kernels, the parareal engine and the
/// experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("matrix exponential overflowed during squaring")]
    Overflow,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered ({0})")]
    NonFinite(&'static str),
    #[error("fast block is not exponentially stable: min Re(eig) = {0}")]
    NotStable(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("row {0} of the parareal lattice is incomplete")]
    InconsistentRow(usize),
    #[error("slope fit needs at least two usable points, got {0}")]
    TooFewPoints(usize),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
