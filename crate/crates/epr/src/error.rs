use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum EprError {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no stationary state: drift matrix has an eigenvalue with nonpositive real part")]
    NoStationaryState,

    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,

    #[error("matrix is not positive semidefinite within tolerance")]
    NotPositiveSemidefinite,

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not antisymmetric within tolerance")]
    NotAntisymmetric,

    #[error("inconsistent model: {0}")]
    InconsistentModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing log-density gradient: operation needs ∇log ρ")]
    MissingDensityGrad,

    #[error("map is not an involution on the probe set")]
    NotInvolution,

    #[error("path {path} exploded to a non-finite state at step {step}")]
    Explosion { path: usize, step: usize },

    #[error("scheme requires {0} model")]
    IncompatibleScheme(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty transition chain")]
    EmptyChain,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
