use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what}{}", index.map(|i| format!(" at index {i}")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        index: Option<usize>,
    },

    #[error("diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error("zero total precision in coordinate {coord}")]
    ZeroPrecision { coord: usize },

    #[error("all {0} chains diverged")]
    AllChainsDiverged(usize),

    #[error("malformed data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }

    /// Attaches a step index to errors that come out of a single update.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::NonFinite { what, index } => Error::Diverged {
                step,
                reason: match index {
                    Some(i) => format!("non-finite {what} at index {i}"),
                    None => format!("non-finite {what}"),
                },
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
