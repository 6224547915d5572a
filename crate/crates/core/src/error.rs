use alloc::string::String;

/// Errors raised by the numerical core.
///
/// The variants mirror how callers react: domain and parameter errors are
/// caller bugs, configuration errors come from user input, and degeneracy
/// means the numbers themselves broke down.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
