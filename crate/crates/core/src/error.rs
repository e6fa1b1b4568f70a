use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("accuracy failure in {what}: relative error estimate {estimate:.3e}")]
    Accuracy { what: String, estimate: f64 },
    #[error("support error: {0}")]
    Support(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by numerical accuracy rather than bad input.
    pub fn is_accuracy(&self) -> bool {
        matches!(self, Error::Accuracy { .. } | Error::Solver(_) | Error::Support(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
