use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("unknown system tag `{0}`")]
    UnknownTag(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("iterative solver failed to converge: residual {residual:.3e} after {iterations} iterations (target {target:.3e})")]
    Nonconvergence {
        residual: f64,
        target: f64,
        iterations: usize,
    },
    #[error("Picard iterate escaped the 2δ ball: trajectory norm {norm:.6e} > {bound:.6e}; the segment horizon is too large for the discrete problem")]
    BallViolation { norm: f64, bound: f64 },
    #[error("no blow-up observed before the horizon")]
    NoBlowUp,
    #[error("profile rejected: transition integral diverges for κ={kappa}, p={p}; smallest admissible κ is {suggested}")]
    ProfileRejected { kappa: u32, p: f64, suggested: u32 },
    #[error("quadrature did not converge: panel-doubling relative disagreement {disagreement:.3e} exceeds {tolerance:.3e}")]
    QuadratureNonconvergence { disagreement: f64, tolerance: f64 },
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
