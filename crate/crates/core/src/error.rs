use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("out of materialized range: {0}")]
    Range(String),

    #[error("limits not attained (oscillation): {0}")]
    Oscillation(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
