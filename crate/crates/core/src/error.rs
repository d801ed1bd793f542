use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("equilibrium iteration did not converge at step {step} (residual {residual:e})")]
    IntegrationFailure { step: usize, residual: f64 },

    #[error("rate ratio {from} Hz -> {to} Hz is not an integer factor")]
    NonIntegerRate { from: f64, to: f64 },

    #[error("input spectrum below division floor at bin {bin}")]
    SpectrumFloor { bin: usize },

    #[error("band of {n_points} bins from bin {first} exceeds the {available} available bins")]
    BandOutOfRange {
        first: usize,
        n_points: usize,
        available: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parameter out of bounds: {0}")]
    OutOfBounds(String),

    #[error("too many simulation failures: {failures} of {attempts} draws")]
    TooManyFailures { failures: usize, attempts: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
