use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by index construction, queries and the bandit loops.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("point norm {norm} exceeds the unit-ball bound")]
    PointNormTooLarge { norm: f64 },

    #[error("query norm {norm} exceeds the declared bound {bound}")]
    QueryNormTooLarge { norm: f64, bound: f64 },

    #[error("duplicate point id {0}")]
    DuplicateId(usize),

    #[error("empty point set")]
    EmptyPointSet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name} = {value}: {requirement}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("unknown arm id {0}")]
    UnknownArm(usize),

    #[error("numerical failure: {0}")]
    Numerical(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(name: &'static str, value: f64, requirement: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            requirement,
        }
    }
}
