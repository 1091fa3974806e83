use thiserror::Error;

/// Errors raised by model construction, numerics and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point outside support: coordinate {coordinate} = {value}")]
    Domain { coordinate: usize, value: f64 },

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("density below positivity floor at x = {x} (boundary-singular)")]
    BoundarySingular { x: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    DepthExhausted { estimate: f64, error_estimate: f64 },

    #[error("numeric failure in {what}: {diagnostic}")]
    NumericFailure { what: String, diagnostic: String },

    #[error("grid under-coverage: {lost_mass:e} probability mass outside the grid")]
    Coverage { lost_mass: f64 },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("linear algebra error: {0}")]
    LinearAlgebra(String),

    #[error("non-finite sample value at index {index}")]
    NonFiniteSample { index: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

impl Error {
    pub(crate) fn numeric(what: impl Into<String>, diagnostic: impl Into<String>) -> Self {
        Error::NumericFailure {
            what: what.into(),
            diagnostic: diagnostic.into(),
        }
    }
}

pub type Result<V, E = Error> = std::result::Result<V, E>;
