use std::path::PathBuf;

use thiserror::Error;

use crate::model::BodyState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, mapped one-to-one onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Integration,
    Unterminated,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Integration => 4,
            ErrorCategory::Unterminated => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("pitch {theta} rad is within the gimbal guard of +/-90 deg")]
    GimbalLock { theta: f64 },

    #[error("airflow angles undefined at speed {speed:e} m/s")]
    UndefinedAirflow { speed: f64 },

    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("aerodynamic table is empty")]
    EmptyTable,

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("config error in {source_name}: {message}")]
    Config {
        source_name: String,
        message: String,
    },

    #[error("integration aborted at t = {time:.6} s: {message}")]
    Integration {
        time: f64,
        message: String,
        snapshot: Box<BodyState>,
    },

    #[error("trajectory did not terminate before {max_time} s")]
    Unterminated { max_time: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {context}: {message}")]
    Csv { context: String, message: String },
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Integration { .. } | Error::GimbalLock { .. } | Error::NonFinite(_) => {
                ErrorCategory::Integration
            }
            Error::Unterminated { .. } => ErrorCategory::Unterminated,
            _ => ErrorCategory::Config,
        }
    }
}
