use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] tokenwise_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A file parsed but violates a format or type invariant.
    #[error("{path}: {message}")]
    InvalidFile { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn invalid_file(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AppError::InvalidFile { path: path.into(), message: message.into() }
    }

    /// Token for the `ERR:<kind>:` prefix.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.kind().as_str(),
            AppError::Io { .. } => "io",
            AppError::InvalidFile { .. } => "invalid-file",
            AppError::Usage(_) => "usage",
        }
    }

    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            _ => 1,
        }
    }
}
