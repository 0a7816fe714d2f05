use qutrit_battery::Error as CoreError;
use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const IO: i32 = 2;
    pub const INTEGRATION: i32 = 3;
    pub const SOLVER: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },

    #[error("output check failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Validation(_) => exit::INTEGRATION,
            CliError::Core { source, .. } => match source {
                CoreError::Io(_) | CoreError::Csv(_) => exit::IO,
                CoreError::NoConvergence { .. } | CoreError::NotCriticalPoint { .. } => exit::SOLVER,
                // integrator step bounds
                CoreError::Range {
                    what: "dt" | "dt·rate",
                ..
                } => exit::INTEGRATION,
                CoreError::InvalidInput(_) | CoreError::Range { .. } => exit::USAGE,
                _ => exit::INTEGRATION,
            },
        }
    }
}

/// Attaches context to core results.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, CoreError> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
