use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] coexist_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 0 success, 2 config error, 3 verification failure, 4 solver failure.
    pub fn exit_code(&self) -> i32 {
        use coexist_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
            CliError::Core(e) => match e {
                E::ConfigError(_) | E::InvalidParams(_) | E::UnsupportedSpinSpace(_) | E::InvalidArity { .. } => 2,
                _ => 4,
            },
        }
    }
}
