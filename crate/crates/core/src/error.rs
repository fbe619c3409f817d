use thiserror::Error;

/// Errors raised by the purity toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid qudit dimension d = {0}: need d >= 2")]
    InvalidDimension(u32),

    #[error("{what} = {value} out of range {lo}..={hi}")]
    OutOfRange {
        what: &'static str,
        value: i64,
        lo: i64,
        hi: i64,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("eigenvalue routine did not converge: {0}")]
    NoConvergence(String),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: usize, lo: usize, hi: usize) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::OutOfRange {
            what,
            value: value as i64,
            lo: lo as i64,
            hi: hi as i64,
        });
    }
    Ok(())
}
