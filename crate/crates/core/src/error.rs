use thiserror::Error;

/// Errors raised by the algebra, fidelity and channel engines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FidError {
    #[error("elements belong to different algebras")]
    AlgebraMismatch,

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("element is not selfadjoint (defect {defect:.3e})")]
    NotSelfadjoint { defect: f64 },

    #[error("element is not positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is {trace:.12} but a density element needs trace 1")]
    NotUnitTrace { trace: f64 },

    #[error("map is not trace preserving (defect {defect:.3e})")]
    NotTracePreserving { defect: f64 },

    #[error("Choi matrix of a multi-block map: use the per-block API")]
    MultiBlockUnsupported,

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("channel does not preserve fidelity (max |dF| = {max_defect:.3e})")]
    NotFidelityPreserving { max_defect: f64 },

    #[error("channel is not implemented by a unitary (residual {residual:.3e})")]
    NotUnitaryImplementable { residual: f64 },

    #[error("element does not live at CAR level {expected}")]
    LevelMismatch { expected: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FidError>;
