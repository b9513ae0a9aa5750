use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ImrlError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ImrlError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid label: {0}")]
    Label(String),

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("mask has no food pixels")]
    EmptyMask,

    #[error("no food pixel is farther than the margin {margin} from the mask boundary")]
    NoFeasiblePoint { margin: f64 },

    #[error("invalid action: {0}")]
    Action(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ImrlError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        ImrlError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ImrlError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, message: impl Into<String>) -> Self {
        ImrlError::Format {
            what,
            message: message.into(),
        }
    }
}
