use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {what} is {actual}, limit {limit}")]
    Capacity { what: &'static str, limit: usize, actual: usize },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("inconsistent system: {0}")]
    Inconsistent(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn capacity(what: &'static str, limit: usize, actual: usize) -> Result<()> {
    if actual > limit {
        Err(Error::Capacity { what, limit, actual })
    } else {
        Ok(())
    }
}
