use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Malformed or inconsistent input data. `line` is 1-based when known.
    #[error("ingestion error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Ingestion { line: Option<usize>, message: String },

    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The AR(1) slope does not indicate mean reversion.
    #[error("series is not mean-reverting: {0}")]
    NonReverting(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn ingestion(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            line,
            message: msg.into(),
        }
    }
}
