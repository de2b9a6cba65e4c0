use thiserror::Error;

/// Errors raised by the model, the solvers and the analysis layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// Two neighbouring particles coincide, so the pair energy is infinite.
    #[error("degenerate configuration: gap {gap} has zero length")]
    DegenerateConfiguration { gap: usize },

    /// The force profile increases somewhere, so the fixed point need not be unique.
    #[error("force profile increases on segment {segment} ([{from}, {to}])")]
    MonotonicityViolation { segment: usize, from: f64, to: f64 },

    #[error("no convergence after {iterations} iterations: {reason}")]
    NoConvergence { iterations: usize, reason: String },

    /// Closed-form gap recursion left its domain: `1 - δ₁²(k-1)F <= 0` at gap `k`.
    #[error("pressure positivity violated at gap {k}")]
    Domain { k: usize },

    #[error("step crossed particles {index} and {} after backtracking at iteration {iteration}", index + 1)]
    OrderingBreach { iteration: usize, index: usize },
}

impl ModelError {
    /// Stable machine-readable name, used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            ModelError::InvalidParameter(_) => "InvalidParameter",
            ModelError::InvalidConfiguration(_) => "InvalidConfiguration",
            ModelError::DegenerateConfiguration { .. } => "DegenerateConfiguration",
            ModelError::MonotonicityViolation { .. } => "MonotonicityViolation",
            ModelError::NoConvergence { .. } => "NoConvergence",
            ModelError::Domain { .. } => "DomainError",
            ModelError::OrderingBreach { .. } => "OrderingBreach",
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
