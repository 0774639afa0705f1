use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("config error in {path}, line {line}: {message}")]
    ConfigLine {
        path: String,
        line: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(riemannlora::Error),

    #[error(transparent)]
    Library(riemannlora::Error),

    #[error("{} invariant(s) failed", .0)]
    InvariantFailures(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 config, 3 numerical, 4 invariant suite, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::ConfigLine { .. } => 2,
            HarnessError::Numerical(_) => 3,
            HarnessError::InvariantFailures(_) => 4,
            HarnessError::Library(_) | HarnessError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<riemannlora::Error> for HarnessError {
    fn from(e: riemannlora::Error) -> Self {
        if e.is_numerical() {
            HarnessError::Numerical(e)
        } else {
            HarnessError::Library(e)
        }
    }
}
