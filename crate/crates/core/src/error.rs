use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A closed-form result was requested outside the parameter range where
    /// it holds. The payload names the violated inequality.
    #[error("validity error: requires {0}")]
    Validity(String),

    #[error("numerical error: {message} (achieved error {achieved_error:e})")]
    Numerical { message: String, achieved_error: f64 },

    #[error("unsupported dimension d = {0}")]
    UnsupportedDimension(usize),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validity(msg: impl Into<String>) -> Self {
        Error::Validity(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, achieved_error: f64) -> Self {
        Error::Numerical {
            message: msg.into(),
            achieved_error,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) | Error::UnsupportedDimension(_) | Error::Io(_) => 2,
            Error::Validity(_) => 3,
            Error::Numerical { .. } => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
