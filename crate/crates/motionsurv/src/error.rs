use thiserror::Error;

/// Errors surfaced by the toolkit.
///
/// `InvalidInput`/`InvalidConfig`/`Parse`/`Io` indicate bad data or setup;
/// `Undefined` and `Numerical` indicate that a computation could not produce
/// a meaningful result from otherwise well-formed input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error in {path} (line {line}): {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed input or configuration (as opposed
    /// to numerical/undefined failures on valid input).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::InvalidConfig(_) | Error::Parse { .. } | Error::Io(_) | Error::Serde(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
