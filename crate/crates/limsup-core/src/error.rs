use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("region {lo:?}..{hi:?} leaves the unit cube; clip it to [0,1]^d or rescale first")]
    OutsideUnitCube { lo: Vec<f64>, hi: Vec<f64> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is outside the estimated support: {0}")]
    NotInSupport(String),

    #[error("similarity dimension {dim_sim} exceeds ambient dimension {d}; the bound needs dim_sim <= d")]
    DimensionTooLarge { dim_sim: f64, d: usize },

    #[error("work budget exceeded: {0}")]
    Budget(String),

    #[error("construction failed at generation {generation}: {reason}")]
    Construction { generation: usize, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
