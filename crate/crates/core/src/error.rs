use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample set is empty")]
    EmptySample,
    #[error("distribution family is empty")]
    EmptyFamily,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("unsupported schema version {found} (expected {expected})")]
    Schema { found: u64, expected: u64 },
    #[error("kernel matrix is not positive definite after {attempts} jitter attempts")]
    SingularKernel { attempts: u32 },
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
