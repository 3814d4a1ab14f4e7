use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: row {row}: {message}")]
    Parse { path: PathBuf, row: usize, message: String },
    #[error("{0}: no data")]
    NoData(PathBuf),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] mpsm::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for bad invocations or configurations, 3 for everything that went
    /// wrong while reading, computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                mpsm::Error::InvalidArgument(_) | mpsm::Error::InvalidDimension(_) | mpsm::Error::Resource(_) => 2,
                _ => 3,
            },
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
