use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value {value} when evaluating at atom {atom} (index {index})")]
    Evaluation { atom: f64, index: usize, value: f64 },

    #[error("non-finite value at knot {knot}, atom {atom}: {value}")]
    Bellman { knot: usize, atom: usize, value: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("singular regression: {0}")]
    Singular(String),

    #[error("non-integrable reference refused: {0}")]
    NonIntegrable(String),

    #[error("bound envelope error: {0}")]
    Envelope(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
