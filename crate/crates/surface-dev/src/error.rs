//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("singular matrix in {context} (|det| = {det:.3e})")]
    Singular { context: String, det: f64 },

    #[error("block pattern violation in {context}: residual {residual:.3e} exceeds {tol:.3e}")]
    BlockPattern {
        context: String,
        residual: f64,
        tol: f64,
    },

    #[error("square boundary law violated: residual {residual:.3e} exceeds {tol:.3e}")]
    BoundaryResidual { residual: f64, tol: f64 },

    #[error("edge mismatch in {composition} composition: residual {residual:.3e} exceeds {tol:.3e}")]
    EdgeMismatch {
        composition: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("semiflat commutator violation for coordinate pair ({i},{j}): residual {residual:.3e}")]
    CommutatorViolation { i: usize, j: usize, residual: f64 },

    #[error(
        "quadrature did not converge after {panels} panels: last refinement changed by {achieved:.3e} (tol {tol:.3e})"
    )]
    QuadratureNonConvergence {
        panels: usize,
        achieved: f64,
        tol: f64,
    },

    #[error("det(G) = {det:.3e} below floor {floor:.3e} at grid node ({i},{j})")]
    ConditionFloor { i: usize, j: usize, det: f64, floor: f64 },

    #[error("index out of range: {context}")]
    IndexOutOfRange { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("covariance Cholesky failed for h={h} even after jitter")]
    CholeskyFailure { h: f64 },

    #[error("development of ensemble member {index} failed: {source}")]
    EnsembleMember {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
