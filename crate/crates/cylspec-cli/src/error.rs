use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration or arguments (exit status 2).
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cylspec::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(cylspec::Error::Input(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
