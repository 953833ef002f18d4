use thiserror::Error;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or an unusable config: exit 2.
    #[error("{0}")]
    Config(String),
    /// Input that parsed but is invalid (a non-unitary matrix, a malformed
    /// dataset): exit 3.
    #[error("{0}")]
    Validation(String),
    /// The numerics broke down: exit 4.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Prefix the message with where it happened.
    pub fn context(self, at: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{at}: {m}")),
            CliError::Validation(m) => CliError::Validation(format!("{at}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{at}: {m}")),
        }
    }
}

impl From<pel_core::Error> for CliError {
    fn from(e: pel_core::Error) -> Self {
        use pel_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Usage(_) | E::Shape { .. } | E::Domain(_) | E::Io(_) => CliError::Config(msg),
            E::Validation(_) | E::NotUnitary { .. } | E::Parse { .. } => CliError::Validation(msg),
            E::Numeric { .. } | E::Diverged { .. } | E::Singular(_) => CliError::Numeric(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
