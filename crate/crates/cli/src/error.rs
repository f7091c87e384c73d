use thiserror::Error;

/// Failure of a subcommand, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// Input was fine but the computation could not produce a result
    /// (no consensus, degenerate geometry, single-class labels). Exit code 3.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 3,
        }
    }
}
