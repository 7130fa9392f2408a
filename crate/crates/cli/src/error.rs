use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config field `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("{context}: {source}")]
    Module {
        context: String,
        #[source]
        source: onearm::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Record {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

impl HarnessError {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 3 for budget errors, 2 for everything else that stops a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Budget(_)
            | HarnessError::Module {
                source: onearm::Error::EnumerationTooLarge { .. },
                ..
            } => 3,
            _ => 2,
        }
    }
}

impl From<onearm::Error> for HarnessError {
    fn from(e: onearm::Error) -> Self {
        match e {
            onearm::Error::Config { key, msg } => HarnessError::Config { key, msg },
            other => HarnessError::Module {
                context: "module".into(),
                source: other,
            },
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, onearm::Error> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| match e {
            onearm::Error::Config { key, msg } => HarnessError::Config { key, msg },
            source => HarnessError::Module {
                context: what(),
                source,
            },
        })
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
