use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("charge has no atoms")]
    EmptyCharge,

    #[error("curve needs at least two samples, got {0}")]
    DegenerateCurve(usize),

    #[error("curve is not 1-Lipschitz: increment {increment} at sample {index} exceeds {bound}")]
    LipschitzViolation {
        index: usize,
        increment: f64,
        bound: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("field panel has no {0}")]
    EmptyPanel(&'static str),

    #[error("quadrature supports dimension <= {max}, got {dim}; use Monte Carlo mode")]
    QuadratureDimension { dim: usize, max: usize },

    #[error("divergence pair not certified: error {error} exceeds threshold {threshold}")]
    Uncertified { error: f64, threshold: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
