use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot partition dataset: {0}")]
    Partition(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("aggregation failed: {0}")]
    Aggregation(String),

    #[error("invalid configuration field `{field}`: {message}")]
    Usage { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(message: impl Into<String>) -> Self {
        Error::Format {
            path: PathBuf::new(),
            line: 0,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn usage(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Usage {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code for this failure class.
    ///
    /// `2` usage, `3` data format, `4` training, `5` I/O, `1` anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage { .. } | Error::Parameter(_) => 2,
            Error::Format { .. } | Error::Partition(_) | Error::Domain(_) => 3,
            Error::Training(_) | Error::Aggregation(_) => 4,
            Error::Io { .. } => 5,
            Error::Dimension { .. } | Error::Precondition(_) => 1,
        }
    }
}
