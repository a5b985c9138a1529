//! `forge` command-line front end and steering service.

pub mod commands;
pub mod config;
pub mod preview;
pub mod protocol;
pub mod server;

use std::process::ExitCode;

pub use commands::run;
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] forge_core::Error),
    #[error("Config: {0}")]
    Config(String),
    #[error("Usage: {0}")]
    Usage(String),
    #[error("Io: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for filesystem and decoding failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Core(e) if e.is_io() => 2,
            _ => 1,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
