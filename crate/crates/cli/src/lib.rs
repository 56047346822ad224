//! Configuration-driven experiment runner for `bdenet`.
//!
//! An experiment is a flat `key = value` file (see [`config`]). The
//! [`experiment`] module turns it into CSV/JSON outputs, [`overlay`] computes
//! analytic curves next to the simulated ones, and [`validate`] runs the
//! acceptance batch.

pub mod app;
pub mod config;
pub mod experiment;
pub mod overlay;
pub mod validate;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration, reported before anything runs.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<bdenet::Error> for CliError {
    fn from(e: bdenet::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
