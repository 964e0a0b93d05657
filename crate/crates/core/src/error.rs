use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The observed data cannot be reproduced by the requested model.
    #[error("infeasible model: {0}")]
    Infeasible(String),

    /// Parameters for which the requested quantity is undefined.
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("sampler failed to converge: {0}")]
    NonConvergence(String),

    /// No ABC simulation fell within tolerance.
    #[error(
        "no simulation accepted out of {sims}; minimum scaled distance seen was {min_distance:.4}, consider a looser tolerance"
    )]
    ZeroAcceptance { sims: usize, min_distance: f64 },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("Bayes factor undefined: {0}")]
    UndefinedBayesFactor(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
