use thiserror::Error;

/// Errors raised by the model, sampler, and bound evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid torus length {0}: must be positive and finite")]
    InvalidLength(f64),

    #[error("point {x} lies outside the torus [0, {length})")]
    OutOfTorus { x: f64, length: f64 },

    #[error("invalid regime: tau*L <= 1 (tau = {tau}, L = {length})")]
    InvalidRegime { tau: f64, length: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tabulated connection function: {0}")]
    InvalidTable(String),

    #[error("divergent integral: tabulated tail does not decay (last value {last})")]
    DivergentTail { last: f64 },

    #[error("quadrature failed to reach tolerance on [{a}, {b}] (estimated error {error:e})")]
    QuadratureFailed { a: f64, b: f64, error: f64 },

    #[error("empty empirical distribution")]
    EmptyDistribution,

    #[error("resource limit exceeded: {requested} node-trials requested, limit {limit}")]
    ResourceLimit { requested: f64, limit: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
