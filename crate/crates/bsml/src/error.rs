//! Error type shared by the library.

use std::fmt;

/// Library result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors surfaced by samplers, chain drivers and validators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller violated an operation's contract (dimension mismatch,
    /// invalid configuration, non-positive scale, ...).
    Contract(String),
    /// A numerical procedure failed; carries the offending quantity.
    Numerical { what: String, value: f64 },
    /// A Gibbs step failed; carries the sweep index at which it happened.
    Chain {
        iteration: usize,
        step: &'static str,
        cause: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(what: impl Into<String>, value: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            value,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize, step: &'static str) -> Self {
        Error::Chain {
            iteration,
            step,
            cause: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Numerical { what, value } => {
                write!(f, "numerical failure: {what} (value {value:e})")
            }
            Error::Chain {
                iteration,
                step,
                cause,
            } => write!(f, "chain aborted at iteration {iteration} in {step}: {cause}"),
        }
    }
}

impl std::error::Error for Error {}

/// Returns an error unless every element of `data` is finite.
pub(crate) fn ensure_finite(name: &str, data: &[f64]) -> Result<()> {
    for (k, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::numerical(format!("{name} not finite at index {k}"), *v));
        }
    }
    Ok(())
}
