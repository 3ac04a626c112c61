use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("point beyond generation {kmax}: d(0,z) = {distance}")]
    OutOfRange { kmax: u32, distance: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("tolerance not met: value {value}, error estimate {estimate}")]
    ToleranceNotMet { value: f64, estimate: f64 },

    #[error("integrand not integrable: {0}")]
    NonIntegrable(String),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty test set")]
    EmptySet,
}
