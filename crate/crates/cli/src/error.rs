use std::path::Path;

use ssisar_core::Error as CoreError;

/// Command failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    #[error("{0}")]
    Core(CoreError),
    #[error("format error: {0}")]
    Format(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(_) | CliError::Format(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Core(e)
        }
    }
}
