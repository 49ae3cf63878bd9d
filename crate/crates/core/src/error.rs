//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("zero vector is outside the domain of {0}")]
    ZeroVector(&'static str),

    #[error("metric family is not admissible: {0}")]
    NotAdmissible(String),

    #[error("curve needs at least 2 samples with strictly increasing parameter")]
    BadCurve,

    #[error("star body radii must be finite and strictly positive")]
    BadRadii,

    #[error("origin is not interior: support function is {0} in some direction")]
    OriginNotInterior(f64),

    #[error("operation requires a convex body (support-based formula invalid)")]
    NonConvex,

    #[error("refinement did not converge, residual {residual:e}")]
    Refinement { residual: f64 },

    #[error("trajectory blow-up at t = {t}: covector norm {norm:e} left [1e-8, 1e8]")]
    BlowUp {
        t: f64,
        norm: f64,
        /// Last good state, base coordinates then covector components.
        last: Vec<f64>,
    },

    #[error("time {t} outside the configured horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("degenerate fundamental tensor along the ray at parameter {0}")]
    DegenerateTensor(f64),

    #[error("path is not positive: generator value {value:e} at a sampled ray")]
    PathNotPositive { value: f64 },

    #[error("representative lies off the unit co-sphere: |F*(v) - 1| = {0:e}")]
    OffUnitCoSphere(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
