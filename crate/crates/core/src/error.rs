use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("bounds error: {0}")]
    Bounds(String),
    #[error("lookup error: {0}")]
    Lookup(String),
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 usage/config, 2 data/format, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Usage(_)
            | Error::Precondition(_)
            | Error::Shape(_)
            | Error::Bounds(_)
            | Error::Lookup(_) => 1,
            Error::Format(_) | Error::Insufficient(_) | Error::Io(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}
