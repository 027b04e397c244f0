use std::fmt;
use std::process::ExitCode;

use deephash::Error;

/// Process exit status. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Usage = 1,
    Data = 2,
    Divergence = 3,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            status: Status::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            status: Status::Data,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Configuration and argument problems are usage errors; a training run that
/// produced non-finite values is a divergence; anything wrong with the files
/// being read or written is a data error.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Config(_) | Error::Capacity(_) => Status::Usage,
            Error::Divergence { .. } => Status::Divergence,
            _ => Status::Data,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;
