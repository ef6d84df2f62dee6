use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A linear system has no unique solution.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("ill-conditioned system (condition number {condition:.3e}): {hint}")]
    IllConditioned { condition: f64, hint: String },

    /// A truncation or series tail exceeds what the caller asked for.
    #[error("precision error: {0}")]
    Precision(String),

    /// The requested quantity does not exist for this input (e.g. Q of the vacuum).
    #[error("undefined: {0}")]
    Undefined(String),

    /// Inputs are mutually incompatible (e.g. moments that no distribution on the support can produce).
    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("resource limit: requested dimension {requested} exceeds cap {cap}")]
    Resource { requested: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
