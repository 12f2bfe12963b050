use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("audio error on {path}: {message}")]
    Audio { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("checkpoint error on {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error("training aborted: {0}")]
    Training(String),
    #[error("clustering error: {0}")]
    Clustering(String),
    #[error("scoring error: {0}")]
    Scoring(String),
    #[error("embedder error in chunk {chunk}: {message}")]
    Embedder { chunk: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
