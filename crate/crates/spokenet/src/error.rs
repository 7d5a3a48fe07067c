use std::path::PathBuf;

/// Errors of the command-line tools, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{stage}: {source}")]
    Core { stage: &'static str, source: spokenet_core::Error },
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        AppError::Format { path: path.into(), message: message.into() }
    }

    /// 2 for configuration problems, 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use spokenet_core::Error as E;
        match self {
            AppError::Config(_) => 2,
            AppError::Core { source: E::NonFinite(_) | E::Numeric(_), .. } => 3,
            AppError::Core { source: E::InvalidArgument(_), stage: "config" } => 2,
            _ => 1,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Attaches a stage name to core errors.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> AppResult<T>;
}

impl<T> Stage<T> for spokenet_core::Result<T> {
    fn stage(self, stage: &'static str) -> AppResult<T> {
        self.map_err(|source| AppError::Core { stage, source })
    }
}
