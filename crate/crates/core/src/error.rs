use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("AP placement failed after {attempts} restarts: {constraint}")]
    Placement { attempts: usize, constraint: String },

    #[error("large-scale model construction failed: {0}")]
    Model(String),

    #[error("precoder construction failed: {0}")]
    Precoder(String),

    #[error("contract violated in `{field}`: {reason}")]
    Contract { field: String, reason: String },

    #[error("{m} APs exceeds the enumeration limit of {limit}")]
    Scale { m: usize, limit: usize },

    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn contract(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Contract {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
