use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes, ranks or parameters outside an operation's contract.
    InvalidArgument(String),
    /// Newton iteration did not reach tolerance; carries the residual norm
    /// after every iterate, starting with the initial guess.
    Convergence { iterations: usize, residual_history: Vec<f64> },
    /// A (near-)zero pivot during factorization.
    Factorization(String),
    /// A NaN or infinity showed up where finite values are required.
    NonFinite(String),
    /// Data generation failed at a specific sample.
    Sample { index: usize, source: Box<Error> },
    /// Training failed at a specific epoch/batch.
    Training { epoch: usize, batch: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Convergence { iterations, residual_history } => write!(
                f,
                "Newton solver did not converge after {iterations} iterations (residual history: {residual_history:?})"
            ),
            Error::Factorization(msg) => write!(f, "factorization failed: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Sample { index, source } => write!(f, "sample {index}: {source}"),
            Error::Training { epoch, batch, source } => {
                write!(f, "training failed at epoch {epoch}, batch {batch}: {source}")
            }
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Sample { source, .. } | Error::Training { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
