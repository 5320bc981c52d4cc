//! Error type shared by every module in the crate.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A machine parameter failed validation.
    InvalidMachine {
        field: &'static str,
        message: String,
    },
    /// A subcarrier plan parameter failed validation.
    InvalidPlan {
        field: &'static str,
        message: String,
    },
    /// A noise specification failed validation.
    InvalidNoise {
        field: &'static str,
        message: String,
    },
    /// A synthesis precondition was violated (empty machine list, bad
    /// subcarrier index, fundamental above Nyquist).
    Synthesis(String),
    /// Window length does not match `sample_rate * window_duration`.
    WindowLength { expected: usize, actual: usize },
    /// An argument fell outside the operation's domain.
    Domain(String),
    /// Scenario configuration error, with the offending field path.
    Config { path: String, message: String },
    /// I/O failure, with path context.
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMachine { field, message } => {
                write!(f, "invalid machine: {field}: {message}")
            }
            Error::InvalidPlan { field, message } => {
                write!(f, "invalid subcarrier plan: {field}: {message}")
            }
            Error::InvalidNoise { field, message } => {
                write!(f, "invalid noise spec: {field}: {message}")
            }
            Error::Synthesis(message) => write!(f, "synthesis: {message}"),
            Error::WindowLength { expected, actual } => write!(
                f,
                "window length {actual} does not match sample_rate * window_duration = {expected}"
            ),
            Error::Domain(message) => write!(f, "{message}"),
            Error::Config { path, message } => {
                if path.is_empty() {
                    write!(f, "configuration: {message}")
                } else {
                    write!(f, "configuration: {path}: {message}")
                }
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
