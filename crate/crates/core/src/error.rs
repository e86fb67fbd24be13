use thiserror::Error;

/// Errors raised by mesh construction, assembly and the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("divergent moment request: {0}")]
    DivergentMoment(String),

    #[error("unsupported kernel for this operation: {0}")]
    UnsupportedKernel(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("factorization failed at pivot {pivot}: {reason}")]
    Factorization { pivot: usize, reason: String },

    #[error("quadrature did not converge: estimated error {error_estimate:e} (tolerance {tolerance:e})")]
    QuadratureNotConverged { error_estimate: f64, tolerance: f64 },

    #[error("iteration stagnated after {iterations} steps (last estimate {last:e})")]
    Stagnation { iterations: usize, last: f64 },

    #[error("non-finite state at step {0}")]
    NonFinite(usize),

    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    Residual { residual: f64, bound: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
