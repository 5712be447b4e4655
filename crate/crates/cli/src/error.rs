use std::fmt::Display;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent configuration; `path` names the field.
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Display) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn runtime(message: impl Display) -> Self {
        CliError::Runtime(message.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
