use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A size guard on an exponential-time routine was exceeded.
    #[error("{what} exceeds limit: {value} > {limit}")]
    Guard {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A document could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn guard(what: &'static str, value: usize, limit: usize) -> Result<()> {
    if value > limit {
        Err(Error::Guard { what, value, limit })
    } else {
        Ok(())
    }
}
