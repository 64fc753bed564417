use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("quadrature order must be at least {min}, got {got}")]
    QuadratureOrder { min: usize, got: usize },

    #[error("invalid network architecture: {0}")]
    InvalidArchitecture(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("singular value decomposition failed")]
    SvdFailed,

    #[error("rank {r} is not admissible (basis holds {available} functions)")]
    RankOutOfRange { r: usize, available: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("time stepping became unstable at step {step}")]
    Unstable { step: usize },

    #[error("unknown problem identifier '{0}'")]
    UnknownProblem(String),

    #[error("problem '{id}' cannot be used here: {reason}")]
    WrongProblemKind { id: String, reason: String },

    #[error("persistence format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
