use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("scatter matrix is not positive definite")]
    Singular,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("logistic fit failed: {0}")]
    FitFailed(String),
    #[error("detector `{0}` is not implemented")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
