use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum StowError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    #[error("solver: {0}")]
    Solver(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("refused: {0}")]
    Refused(String),

    #[error("config digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl StowError {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            StowError::InvalidConfig(_) => "invalid_config",
            StowError::Contract(_) => "contract",
            StowError::Numerical { .. } => "numerical",
            StowError::Solver(_) => "solver",
            StowError::Parse { .. } => "parse",
            StowError::Refused(_) => "refused",
            StowError::DigestMismatch { .. } => "digest_mismatch",
            StowError::Io(_) => "io",
            StowError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, StowError>;
