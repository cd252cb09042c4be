use thiserror::Error;

/// Errors raised by the optimization engine and its building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller-supplied data violates a precondition (dimension mismatch,
    /// out-of-domain point, non-differentiable acquisition, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration is internally inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A factorization failed even after the jitter ladder, or a variance
    /// came out more negative than rounding allows.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Wraps an error raised inside the optimization loop with the
    /// iteration it happened in.
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
