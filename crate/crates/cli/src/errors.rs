//! CLI error type carrying the exit-code protocol:
//! 0 success, 2 config error, 3 artifact/IO error, 4 tolerance failure.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, flags, or input schema.
    Config(String),
    /// Missing, unreadable, unwritable, or corrupt artifacts.
    Artifact(String),
    /// A configured tolerance was violated.
    Tolerance(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Artifact(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Artifact(m) => write!(f, "artifact error: {m}"),
            CliError::Tolerance(m) => write!(f, "tolerance failure: {m}"),
        }
    }
}

/// Map a core-library failure that stems from user-provided parameters.
pub fn cfg(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Map an IO or computation failure while producing artifacts.
pub fn art(e: impl fmt::Display) -> CliError {
    CliError::Artifact(e.to_string())
}
