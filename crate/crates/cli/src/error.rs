use std::fmt;
use std::io;
use std::path::Path;

use nvreadout::Error;

/// Failure of a CLI run, grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config file, flag or parameter value. Exit 2.
    Config(String),
    /// A file could not be read or written. Exit 3.
    Io(String),
    /// An input broke a data contract: malformed file, wrong trace length, single class. Exit 4.
    Contract(String),
    /// Anything else. Exit 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Contract(_) => 4,
        }
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Contract(m) => write!(f, "contract violation: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let message = err.to_string();
        match err {
            Error::InvalidParameter(_) => CliError::Config(message),
            Error::Io(_) => CliError::Io(message),
            Error::ContractViolation(_) | Error::LengthMismatch { .. } | Error::MissingClass | Error::Format(_) => {
                CliError::Contract(message)
            }
            Error::AbsorbingState { .. } | Error::Calibration(_) | Error::Json(_) => CliError::Other(message),
        }
    }
}
