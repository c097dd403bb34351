//! Library side of the `tfn` command: configuration, the six commands, and
//! the ablation grid runner.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::{run, Command};
pub use config::{RunConfig, Settings};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Runtime(#[from] tfn_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub const CONFIG_EXIT: i32 = 2;
    pub const RUNTIME_EXIT: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => Self::CONFIG_EXIT,
            _ => Self::RUNTIME_EXIT,
        }
    }
}

pub(crate) fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}
