use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PinError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid jump kernel: {0}")]
    InvalidKernel(String),

    #[error("integral diverges in dimension {dim} (recurrent walk)")]
    Divergent { dim: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("every weight underflowed to zero at box radius {radius}")]
    AbsorbedAll { radius: usize },

    #[error("truncation certificate {certificate:e} still above tolerance at radius cap {radius}")]
    ToleranceNotMet { radius: usize, certificate: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("fit rejected: {found} valid points, at least {needed} required")]
    InsufficientPoints { found: usize, needed: usize },

    #[error("tilted sampler needs b > 0 (beta = {beta} is not above the critical point)")]
    NotSupercritical { beta: f64 },

    #[error("rejection sampler stalled: acceptance rate {rate:e} after {proposals} proposals")]
    RejectionStall { rate: f64, proposals: u64 },
}

pub type Result<T> = std::result::Result<T, PinError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> PinError {
    PinError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
