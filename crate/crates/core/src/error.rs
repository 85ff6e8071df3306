use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// The input is well formed but carries no usable signal.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Voxel data violates a value invariant.
    #[error("invalid data: {0}")]
    Data(String),
    /// Model parameters are not usable (non-finite or inconsistent shapes).
    #[error("invalid model state: {0}")]
    ModelState(String),
    /// The training loss stopped being finite.
    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    /// Lesion placement rejection sampling ran out of attempts.
    #[error("no valid lesion placement after {attempts} attempts")]
    Placement { attempts: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
