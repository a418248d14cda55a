use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped so that callers (the CLI in particular) can map them
/// onto coarse failure classes: parse/structural/argument problems, numerical
/// or resource failures, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    pub(crate) fn structural(message: impl Into<String>) -> Self {
        Error::Structural(message.into())
    }

    /// Coarse failure class used for process exit codes.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::Structural(_) | Error::Argument(_) | Error::Format(_) => {
                ErrorClass::Input
            }
            Error::Resource(_) | Error::Numerical { .. } => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
