use thiserror::Error;

use rydcount_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{0}")]
    Usage(String),

    #[error("{0}: {1}")]
    Io(String, std::io::Error),

    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    /// 2 usage or parse, 3 resource cap, 4 numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Resource(_)) => 3,
            CliError::Core(CoreError::Numerical(_)) => 4,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io(..) | CliError::Mismatch(_) => 1,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
