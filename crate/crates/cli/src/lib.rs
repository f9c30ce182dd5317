//! Configuration, orchestration and reporting for the `stable-fields`
//! command-line tool.

pub mod config;
pub mod manifest;
pub mod report;
pub mod run;
pub mod svg;

use stable_fields::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Core(e) => match e {
                Error::Numerical(_) | Error::InsufficientData(_) => EXIT_NUMERICAL,
                Error::Io(_) => EXIT_IO,
                Error::Parameter { .. }
                | Error::Pole(_)
                | Error::Configuration(_)
                | Error::ConservativeRegime(_)
                | Error::Format(_) => EXIT_VALIDATION,
            },
        }
    }
}
