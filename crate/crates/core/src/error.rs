use std::path::PathBuf;

use crate::data_io::NpyError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("KL divergence undefined: reference has zero mass at index {index} where p = {mass}")]
    DivergenceUndefined { index: usize, mass: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("training diverged after {halvings} learning-rate halvings (last lr {lr})")]
    TrainingDiverged { halvings: u32, lr: f64 },

    #[error("{path}: {source}")]
    Npy {
        path: PathBuf,
        #[source]
        source: NpyError,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {pointer}: {message}")]
    Manifest {
        path: PathBuf,
        pointer: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by reading or parsing external files.
    pub fn is_io_or_parse(&self) -> bool {
        matches!(
            self,
            Error::Npy { .. } | Error::Parse { .. } | Error::Manifest { .. } | Error::Io { .. }
        )
    }
}
