use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error(transparent)]
    Core(#[from] effham::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 usage or configuration, 2 invalid generator, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::InvalidGenerator(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 1,
        }
    }
}
