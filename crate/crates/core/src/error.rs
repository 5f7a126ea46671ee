use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VoiError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue {index} must be positive and finite, got {value}")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("eigenvector matrix is not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("reconstructed covariance is not symmetric (residual {residual:e})")]
    NotSymmetric { residual: f64 },

    #[error("attribute vectors are linearly dependent (Gram determinant {determinant:e})")]
    RankDeficient { determinant: f64 },

    #[error("traces differ: {left} vs {right}")]
    TraceMismatch { left: f64, right: f64 },

    #[error("covariate {index} is not a unit vector (norm {norm})")]
    NotUnitVector { index: usize, norm: f64 },

    #[error("posterior conditioning failed: condition number {condition:e} exceeds {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("covariate {index} is not a pure signal of an on-support state")]
    OffSupport { index: usize },

    #[error("design reaches every state; a non-spanning split needs rank R < K (R = {rank})")]
    Spanning { rank: usize },

    #[error("allocation was not produced from this prior")]
    AllocationMismatch,

    #[error("allocation direction {index} is negative ({value})")]
    NegativeAllocation { index: usize, value: f64 },

    #[error("allocation direction {index} has fractional count {value}")]
    FractionalAllocation { index: usize, value: f64 },

    #[error("no sign change of dΠ/dτ found for τ ≤ {tau_max}")]
    NoSignChange { tau_max: f64 },
}

pub type Result<T, E = VoiError> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> VoiError {
    VoiError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
