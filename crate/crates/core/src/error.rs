use thiserror::Error;

/// Errors raised by the simulation and estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} s is outside the scene interval [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },

    #[error("{what} {id} not found")]
    NotFound { what: &'static str, id: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
