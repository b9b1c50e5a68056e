use thiserror::Error;

/// Errors raised by the geometry, tensor and solver layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("vector contains a non-finite entry at index {index}")]
    NonFinite { index: usize },
    /// The dual vector is exactly zero, so no descent direction exists.
    #[error("dual vector is zero; the point is first-order stationary")]
    ZeroGradient,
    #[error("tensor of order {order} applied to {got} vectors")]
    Arity { order: usize, got: usize },
    #[error("direction is not unit length (norm = {norm})")]
    NonUnitDirection { norm: f64 },
    #[error("regularization weight must be positive for a coercive model (sigma = {sigma})")]
    NonCoercive { sigma: f64 },
    #[error("problem does not supply derivatives of order {order} (max {max})")]
    MissingDerivative { order: usize, max: usize },
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
