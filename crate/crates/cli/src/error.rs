use std::fmt;
use std::io;

use koopman_lyap::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
    Io,
}

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Validation, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Numeric, message: message.into() }
    }

    pub fn io(context: impl fmt::Display, err: io::Error) -> Self {
        CliError { kind: ErrorKind::Io, message: format!("{context}: {err}") }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Io, message: message.into() }
    }

    /// Wraps an error from the numerical core, tagged with the stage it came from.
    pub fn core(stage: &str, err: CoreError) -> Self {
        let kind = match err {
            CoreError::Parse(_)
            | CoreError::Dimension { .. }
            | CoreError::InvalidProblem(_)
            | CoreError::Triangulation(_)
            | CoreError::BBoundTooSmall { .. }
            | CoreError::InvalidArgument(_) => ErrorKind::Validation,
            _ => ErrorKind::Numeric,
        };
        CliError { kind, message: format!("{stage}: {err}") }
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Numeric => 2,
            ErrorKind::Io => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}
