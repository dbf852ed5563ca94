//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry construction, validation and verification.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong dimension for the ambient product.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    /// A point violates the quadric constraint of a nonflat factor.
    #[error("point is off the product quadric (factor {factor}, defect {defect:.3e}, tol {tol:.1e})")]
    OffQuadric { factor: usize, defect: f64, tol: f64 },

    /// The requested operation is undefined for this ambient (e.g. theta with a flat factor).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The chart Jacobian dropped rank at a sampled point.
    #[error("immersion degenerate at chart point {point:?}: {detail}")]
    DegenerateImmersion { point: Vec<f64>, detail: String },

    /// An internal consistency assertion failed: the inputs describe
    /// something that is not the geometry of an isometric immersion.
    #[error("geometry inconsistency: {0}")]
    GeometryInconsistency(String),

    /// A weighted sum whose factors do not induce the same metric.
    #[error("not an isometric immersion: {0}")]
    NotIsometric(String),

    /// A caller-supplied field violated its contract (e.g. a "normal" field
    /// that drifts out of the normal bundle).
    #[error("input contract violated: {0}")]
    InputContract(String),

    /// Scenario or expression text failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A scenario parsed but is not a valid problem statement.
    #[error("validation error: {0}")]
    Validation(String),

    /// A chart point too close to the boundary for the requested stencil.
    #[error("chart point {point:?} lacks margin {needed:.3e} for differentiation")]
    InsufficientMargin { point: Vec<f64>, needed: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
