//! Crate-wide error type.

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

    #[error("configuration error: {0}")]
    Config(String),

    #[error("environment error: {0}")]
    Environment(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("unknown type `{0}` (not in the configured type vocabulary)")]
    UnknownType(String),

    #[error("invalid etype pattern key `{0}`")]
    PatternKey(String),

    #[error("no JSON array found in completion output")]
    NoJsonArray { raw: String },

    #[error("standardization failed for `{description}`: {reason}")]
    Standardize { description: String, reason: String },

    #[error("llm backend unavailable after {attempts} attempts: {detail}")]
    BackendUnavailable { attempts: u32, detail: String },

    #[error("no replay fixture for dialogue hash {hash}")]
    FixtureMiss { hash: String },

    #[error("invalid dialogue: {0}")]
    Dialogue(String),

    #[error("malformed record at {path}:{line}: {detail}")]
    Record {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
