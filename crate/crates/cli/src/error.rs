use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("unknown corpus entry `{0}`")]
    UnknownCorpus(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: nclab::Error,
    },
    #[error(transparent)]
    Core(#[from] nclab::Error),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("solver config: {0}")]
    Config(String),
}

impl CliError {
    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach a short description of what was being computed to a core error.
pub trait Context<T> {
    fn context(self, what: &str) -> Result<T>;
}

impl<T> Context<T> for nclab::Result<T> {
    fn context(self, what: &str) -> Result<T> {
        self.map_err(|source| CliError::Module { context: what.to_string(), source })
    }
}
