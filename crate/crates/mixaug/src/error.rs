use std::io;
use std::path::{Path, PathBuf};

/// Errors raised by file formats, pool execution and the command line.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] mixaug_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: unsupported {what}", path.display())]
    Unsupported { path: PathBuf, what: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit status for a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Io = 2,
    Numerical = 3,
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Self::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.as_ref().to_path_buf(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        use mixaug_core::Error as C;
        match self {
            Error::Core(C::Argument(_)) | Error::Config(_) => ExitCode::Validation,
            Error::Core(C::Data(_))
            | Error::Io { .. }
            | Error::Format { .. }
            | Error::Unsupported { .. } => ExitCode::Io,
            Error::Core(
                C::Degenerate(_) | C::ModelState(_) | C::Diverged { .. } | C::Placement { .. },
            ) => ExitCode::Numerical,
        }
    }

    /// Short stable identifier used in result summaries.
    pub fn code_name(&self) -> &'static str {
        use mixaug_core::Error as C;
        match self {
            Error::Core(C::Argument(_)) => "invalid_argument",
            Error::Core(C::Data(_)) => "invalid_data",
            Error::Core(C::Degenerate(_)) => "degenerate_input",
            Error::Core(C::ModelState(_)) => "model_state",
            Error::Core(C::Diverged { .. }) => "training_diverged",
            Error::Core(C::Placement { .. }) => "placement_failed",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Unsupported { .. } => "unsupported",
            Error::Config(_) => "config",
        }
    }
}
