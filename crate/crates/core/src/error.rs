use std::path::PathBuf;

use thiserror::Error;

use crate::magnet::LayoutViolation;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the simulator and the learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {}", fmt_violations(.0))]
    InvalidLayout(Vec<LayoutViolation>),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("non-finite magnetization in magnet {magnet} at t = {t:e} s (time step too large?)")]
    NonFinite { magnet: usize, t: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular system: normal matrix is not positive definite (pivot {pivot} = {value:e})")]
    Singular { pivot: usize, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

fn fmt_violations(v: &[LayoutViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
