use std::path::PathBuf;

/// Errors of the IO / harness layer. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] zildp_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;

impl AppError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        AppError::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// 1 usage, 2 data, 3 numeric or inference.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Io { .. } | AppError::Format { .. } => 2,
            AppError::Core(e) if e.is_data_error() => 2,
            AppError::Core(_) => 3,
        }
    }
}
