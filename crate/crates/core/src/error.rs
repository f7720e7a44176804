use std::fmt;

/// Library-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor was handed parameters outside its admissible range.
    InvalidParameter(String),
    /// An operation was called with an argument outside its domain.
    Domain(String),
    /// A structural precondition was violated (e.g. a solver that needs a
    /// density was handed an atomic population).
    Precondition(String),
    /// A numerical routine failed to reach its target accuracy. Carries the
    /// error estimate that was actually achieved.
    Numeric { message: String, error_estimate: f64 },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
    pub fn numeric(msg: impl Into<String>, estimate: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            error_estimate: estimate,
        }
    }

    /// True for failures of numerical routines, as opposed to bad inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Precondition(m) => write!(f, "precondition violated: {m}"),
            Error::Numeric {
                message,
                error_estimate,
            } => write!(f, "numeric error: {message} (achieved error {error_estimate:.3e})"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
