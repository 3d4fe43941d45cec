use std::fmt;

use qmra_core::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Backend(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Backend(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Backend(m) => write!(f, "backend error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io { .. } | Error::Parse { .. } | Error::InvalidGraph(_) => CliError::Io(msg),
            Error::Transport { .. }
            | Error::Protocol(_)
            | Error::Credential(_)
            | Error::Capacity { .. }
            | Error::Backend { .. } => CliError::Backend(msg),
            Error::Numeric(_) | Error::Degenerate(_) => CliError::Numeric(msg),
            Error::InvalidSize(_)
            | Error::Connectivity(_)
            | Error::Dimension { .. }
            | Error::InvalidParameter(_) => CliError::Usage(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
