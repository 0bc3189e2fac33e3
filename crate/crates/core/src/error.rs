use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation precondition does not hold.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("row h_k is not a convex combination of the other rows (residual {residual:.3e})")]
    NotHardToDistinguish { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("moment degree {0} exceeds the supported maximum")]
    DegreeTooHigh(usize),

    #[error("directions are nearly parallel (|u·v| = {0}); quadrature is ill-conditioned")]
    NearParallel(f64),

    #[error("retry budget of {budget} draws exhausted after collecting {found} of {wanted} vectors")]
    BudgetExhausted { budget: usize, found: usize, wanted: usize },

    #[error("noise matrix is singular (smallest singular value {sigma_min:.3e})")]
    SingularH { sigma_min: f64 },

    #[error("decision-boundary root finding failed: {0}")]
    RootFinding(String),

    #[error("training diverged at step {step}: loss estimate {loss:.4} vs initial {initial:.4}")]
    Divergence { step: usize, loss: f64, initial: f64 },

    #[error("learner unavailable: {0}")]
    Learner(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
