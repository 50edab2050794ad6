use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{}", match .line { Some(l) => format!("line {l}: {}", .message), None => .message.clone() })]
    Validation { line: Option<u64>, message: String },

    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Lookup(String),

    #[error("{0}")]
    Domain(String),

    #[error("{0}")]
    Aggregation(String),

    #[error("{0}")]
    Contract(String),

    #[error("{0}")]
    Dimension(String),

    #[error("no trained model for method {method}: {hint}")]
    MissingModel { method: String, hint: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    /// Stable machine-readable code printed as the CLI error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "E_PARSE",
            Error::Validation { .. } => "E_VALIDATION",
            Error::Config(_) => "E_CONFIG",
            Error::Lookup(_) => "E_LOOKUP",
            Error::Domain(_) => "E_DOMAIN",
            Error::Aggregation(_) => "E_AGGREGATION",
            Error::Contract(_) => "E_CONTRACT",
            Error::Dimension(_) => "E_DIMENSION",
            Error::MissingModel { .. } => "E_MISSING_MODEL",
            Error::Io { .. } => "E_IO",
            Error::Format(_) => "E_FORMAT",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        Error::Parse {
            line,
            message: e.to_string(),
        }
    }
}
