use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate measurement branch at site {site}: probability {probability:e}")]
    DegenerateBranch { site: usize, probability: f64 },

    #[error("non-finite weak-measurement outcome at site {site}")]
    NonFiniteOutcome { site: usize },

    #[error("{what} = {value} exceeds the limit of {limit}")]
    SizeLimit {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("fit window error: {0}")]
    Window(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("series is not monotonically decreasing at index {index}")]
    NotMonotone { index: usize },

    #[error("no crossing of {level} within the scanned range")]
    NoCrossing { level: f64 },

    #[error("integration became unstable at t = {time}")]
    Unstable { time: f64 },

    #[error("no data: {0}")]
    NoData(String),

    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
