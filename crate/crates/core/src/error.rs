use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the summarization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called on a tensor that does not depend on any parameter")]
    Untaped,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("no gold summary for document {0:?}")]
    NoGoldSummary(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line harness.
    ///
    /// 1 is a usage error, 2 a data error, 3 a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Numerical(_) | Error::Untaped => 3,
            Error::Shape { .. } | Error::Io { .. } | Error::Parse { .. } | Error::Data(_) | Error::NoGoldSummary(_) => {
                2
            }
        }
    }
}
