use thiserror::Error;

pub type Result<T> = std::result::Result<T, OtkError>;

#[derive(Debug, Error)]
pub enum OtkError {
    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {limit:.3e})")]
    NotHermitian { defect: f64, limit: f64 },

    #[error("{what} did not converge after {iterations} iterations (final gap {gap:.3e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    SizeOverflow { dim: usize, cap: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("vector is not a unit vector (norm {0})")]
    NotUnitVector(f64),

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown gallery name {0:?}")]
    UnknownName(String),

    #[error("tuple is not commuting normal (diagonalization residual {0:.3e})")]
    NotNormalCommuting(f64),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
