use std::path::PathBuf;

/// Errors surfaced by file handling, configuration and the experiment driver.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Numerical {
        context: String,
        #[source]
        source: dsubcox_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} replicates failed for {method} at r={r} (limit 5%); first failure: {first}")]
    TooManyFailures {
        method: String,
        r: usize,
        failed: usize,
        total: usize,
        first: String,
    },
}

impl HarnessError {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HarnessError::Data {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn numerical(context: impl Into<String>, source: dsubcox_core::Error) -> Self {
        HarnessError::Numerical {
            context: context.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Data { .. } | HarnessError::Io { .. } => 3,
            HarnessError::Numerical { .. } | HarnessError::TooManyFailures { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
