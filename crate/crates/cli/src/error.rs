use serde::Serialize;
use thiserror::Error;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(fsopoint::Error),
}

impl From<fsopoint::Error> for CliError {
    fn from(e: fsopoint::Error) -> Self {
        match e {
            fsopoint::Error::SynthesisFailed(m) => CliError::Infeasible(m),
            fsopoint::Error::InvalidParameter { .. }
            | fsopoint::Error::Domain(_)
            | fsopoint::Error::Unstable(_) => CliError::Validation(e.to_string()),
            other => CliError::Model(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) | CliError::Model(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Infeasible(_) => "infeasible",
            CliError::Verification(_) => "verification",
            CliError::Io(_) => "io",
            CliError::Model(_) => "model",
        }
    }
}

#[derive(Serialize)]
pub struct ErrorReport<'a> {
    pub schema_version: u32,
    pub error: &'a str,
    pub kind: &'a str,
    pub exit_code: i32,
}
