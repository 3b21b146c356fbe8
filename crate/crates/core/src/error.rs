use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("unlocalizable configuration: {0}")]
    Unlocalizable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bisection failed: {0}")]
    NoRoot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
