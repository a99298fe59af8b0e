use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("acceptance gate failed: {0}")]
    Gate(String),

    #[error("{0}")]
    Core(#[from] trajrl::Error),

    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Training(_) => 3,
            HarnessError::Gate(_) => 4,
            HarnessError::Core(trajrl::Error::InvalidArgument(_)) => 2,
            HarnessError::Core(_) | HarnessError::Io { .. } => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
