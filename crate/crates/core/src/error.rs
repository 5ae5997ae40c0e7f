use thiserror::Error;

/// Errors produced by map evaluation, control synthesis and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("assumption check failed: {0}")]
    Certification(String),

    #[error("noise level out of bounds: {0}")]
    NoiseBound(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("numeric failure at step {step}: {message}")]
    Step { step: usize, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
