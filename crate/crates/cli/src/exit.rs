use std::fmt;

use earload_core::Error;

pub const USAGE: u8 = 2;
pub const MISSING_INPUT: u8 = 3;
pub const SCHEMA: u8 = 4;
pub const PROCESSING: u8 = 5;

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub fn fail(code: u8, message: impl Into<String>) -> anyhow::Error {
    Failure {
        code,
        message: message.into(),
    }
    .into()
}

pub fn code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::AboveNyquist { .. } | Error::UnstableFilter { .. } => {
            USAGE
        }
        Error::MissingFile(_) | Error::MissingBaseline { .. } => MISSING_INPUT,
        Error::Schema { .. }
        | Error::Mismatch(_)
        | Error::MissingTask { .. }
        | Error::RateMismatch { .. }
        | Error::UnsupportedEncoding { .. }
        | Error::Wav { .. } => SCHEMA,
        _ => PROCESSING,
    }
}

/// Exit code for an error chain: the first `Failure` or core error wins.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return code_for(e);
        }
    }
    PROCESSING
}
