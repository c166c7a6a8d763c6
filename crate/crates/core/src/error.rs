//! Crate-wide error type.

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    /// Malformed input file, with the offending line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("batch has {size} rows; need at least 2 to form candidates")]
    NoCandidates { size: usize },
    #[error("no span recorded for entity '{entity}'")]
    MissingSpan { entity: String },
    #[error("degenerate batch: every anchor has zero matching candidates")]
    DegenerateBatch,
    #[error("{available} distinct entities available, batch requires {required}")]
    InsufficientEntities { available: usize, required: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) | Error::DegenerateBatch => 4,
            _ => 3,
        }
    }

    /// Short machine-readable tag, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidBox(_) => "invalid_box",
            Error::Parse { .. } => "parse",
            Error::Data(_) => "data",
            Error::Config(_) => "config",
            Error::Numerical(_) => "numerical",
            Error::NoCandidates { .. } => "no_candidates",
            Error::MissingSpan { .. } => "missing_span",
            Error::DegenerateBatch => "degenerate_batch",
            Error::InsufficientEntities { .. } => "insufficient_entities",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
