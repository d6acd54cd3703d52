use thiserror::Error;

/// Errors raised anywhere in the sizing pipeline.
///
/// The variants fall into two families that the CLI maps to different exit
/// codes: configuration problems (`Domain`, `Config`) and data problems
/// (everything else).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input has no usable dispersion or mean (e.g. all-zero trips).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Input records failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Two tables that must share a schema do not.
    #[error("schema mismatch: {0}")]
    Schema(String),

    /// Bad or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A CSV or JSON file could not be parsed.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Validation(_) => "validation",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    pub fn is_config(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Config(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("json: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
