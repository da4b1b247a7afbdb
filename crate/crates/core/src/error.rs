use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid mass {mass} at point {index}")]
    InvalidMass { index: usize, mass: f64 },

    #[error("non-finite coordinate at point {0}")]
    NonFiniteCoordinate(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("precomputed index {index} out of range for {size}x{size} matrix")]
    IndexOutOfRange { index: f64, size: usize },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("evaluation failed at ({i}, {j}): {source}")]
    Entry {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("iteration cap {0} exceeded")]
    CapExceeded(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
