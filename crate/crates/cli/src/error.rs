use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: refusing to overwrite existing output (use --force)")]
    Exists { path: PathBuf },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: mdgdp::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source {
                mdgdp::Error::Numerical(_) | mdgdp::Error::CanonicalizationUnavailable(_) => 3,
                mdgdp::Error::Domain(_) | mdgdp::Error::Structural(_) | mdgdp::Error::Generation(_) => 2,
                mdgdp::Error::Input { .. } | mdgdp::Error::Io(_) => 1,
            },
            CliError::Exists { .. } | CliError::Format { .. } | CliError::Io { .. } => 1,
        }
    }
}

pub(crate) fn core(context: impl Into<String>) -> impl FnOnce(mdgdp::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Core { context, source }
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
