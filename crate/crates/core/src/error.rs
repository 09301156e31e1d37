use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not Hermitian: |A[{row},{col}] - conj(A[{col},{row}])| = {deviation:e}")]
    NotHermitian {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-positive variance {0:e} from Gaussian division")]
    NonPositiveVariance(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("LDPC construction failed after {attempts} attempts: {reason}")]
    CodeConstruction { attempts: usize, reason: String },

    #[error("trellis has {states} states, above the limit of {limit}")]
    TrellisTooLarge { states: usize, limit: usize },

    #[error("frame with seed {seed:#018x}: {source}")]
    Frame {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
