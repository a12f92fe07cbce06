use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {what} (line {line}): {msg}")]
    Parse { what: String, line: usize, msg: String },

    #[error("invalid track: {0}")]
    Track(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("no collision-free candidate trajectory")]
    Blocked,

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("incomplete game tree: {count} pending leaves, first missing {first:?}")]
    IncompleteTree { count: usize, first: Vec<String> },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training aborted: {0}")]
    Training(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(what: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { what: what.into(), line, msg: msg.into() }
    }
}
