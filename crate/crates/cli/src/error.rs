use fdrt_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("malformed input file {path}: {msg}")]
    Format { path: String, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 0 success, 1 I/O, 2 bad configuration or input, 3 numerical precondition, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::Config(_) | CoreError::Domain(_) => 2,
                CoreError::Precondition(_) | CoreError::Resolution(_) => 3,
                CoreError::Divergence(_) => 4,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
