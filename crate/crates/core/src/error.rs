use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("class {class} has {available} samples, {needed} required")]
    InsufficientSamples {
        class: u8,
        needed: usize,
        available: usize,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged in {stage} at epoch {epoch}, step {step}: loss = {loss}")]
    Divergence {
        stage: &'static str,
        epoch: usize,
        step: usize,
        loss: f64,
    },

    #[error("solver did not converge within {iterations} iterations (violation {violation:e})")]
    NonConvergence { iterations: u64, violation: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
