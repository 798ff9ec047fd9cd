use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("strand length must be at least 2, got {0}")]
    InvalidSize(usize),

    #[error("cell index {index} out of range for strand of length {len}")]
    OutOfBounds { index: usize, len: usize },

    #[error("cannot parse strand: unexpected character {0:?} (expected V, 0 or 1)")]
    StrandParse(char),

    #[error("population must contain at least one writer")]
    EmptyPopulation,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown variant {0:?} (expected naive, basic, waiting, self-stabilizing or active-inactive)")]
    UnknownVariant(String),

    #[error("birth-death chain is degenerate (up or down probability is zero)")]
    DegenerateChain {
        /// Exact answer when the boundary structure forces one.
        forced: Option<f64>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True when the failure came from the filesystem rather than from inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
