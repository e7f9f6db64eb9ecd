use std::fmt;
use std::process::ExitCode;

/// Failure of one command, grouped by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, unreadable or corrupt checkpoint, topology mismatch.
    Config(String),
    /// Missing or malformed dataset.
    Data(String),
    /// Training produced a non-finite parameter.
    NonFinite(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
            CliError::NonFinite(_) => ExitCode::from(3),
        }
    }

    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn data(e: impl fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::NonFinite(m) => write!(f, "training aborted: {m}"),
        }
    }
}

/// Errors raised while training or evaluating: non-finite values keep their
/// own code, everything else is a config problem.
impl From<xy_ep::Error> for CliError {
    fn from(e: xy_ep::Error) -> Self {
        match e {
            xy_ep::Error::NonFinite { .. } => CliError::NonFinite(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
