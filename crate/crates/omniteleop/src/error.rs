use std::path::{Path, PathBuf};

use omniteleop_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Schema or range violation; `path` is the dotted field path.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Sim(#[from] CoreError),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl ToString) -> Self {
        AppError::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }

    /// Parameter validation failures become config errors; anything else stays a simulation error.
    pub fn from_core_config(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { field, reason } => AppError::Config {
                path: field.to_string(),
                msg: reason.to_string(),
            },
            CoreError::InvalidScenario(msg) => AppError::Config {
                path: String::new(),
                msg: msg.to_string(),
            },
            other => AppError::Sim(other),
        }
    }

    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Sim(CoreError::Diverged { .. } | CoreError::NonFiniteState { .. }) => 2,
            _ => 1,
        }
    }
}
