use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum TksdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("matrix is not positive definite (last jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("infeasible domain: acceptance rate {rate:e} after {proposals} proposals")]
    InfeasibleDomain { rate: f64, proposals: u64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("conditional model requires an observation index")]
    MissingObsIndex,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trial with seed {seed} failed: {source}")]
    Trial {
        seed: u64,
        #[source]
        source: Box<TksdError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TksdError {
    /// Bad input or configuration, as opposed to a numerical failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            TksdError::Config(_)
            | TksdError::InvalidInput(_)
            | TksdError::DimensionMismatch { .. }
            | TksdError::Parse { .. }
            | TksdError::MissingObsIndex
            | TksdError::Io(_) => true,
            TksdError::Trial { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, TksdError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(TksdError::DimensionMismatch { expected, got });
    }
    Ok(())
}
