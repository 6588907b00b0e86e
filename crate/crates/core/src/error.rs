use std::path::PathBuf;

/// Errors raised anywhere in the benchmark pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },
    #[error("generation error: {0}")]
    Generation(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("stage `{stage}` failed: {inner}")]
    Stage { stage: String, inner: Box<Error> },
    #[error("i/o error on {path}: {inner}")]
    Io {
        path: PathBuf,
        inner: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(
        source_name: impl Into<String>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, inner: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            inner,
        }
    }

    /// Short machine-readable kind used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
            Error::Geometry(_) => "geometry",
            Error::Config(_) => "config",
            Error::Argument(_) => "argument",
            Error::Domain(_) => "domain",
            Error::Training { .. } => "training",
            Error::Generation(_) => "generation",
            Error::Internal(_) => "internal",
            Error::Stage { .. } => "stage",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
