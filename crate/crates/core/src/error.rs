use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point or geometry violates the domain contract.
    Domain(String),
    /// An argument is outside the admissible range of an operation.
    Argument(String),
    /// A precondition on a field (divergence, boundary values) is violated.
    Precondition(String),
    /// An iterative solver did not reach its tolerance.
    Solver { what: &'static str, iterations: usize, residual: f64 },
    /// A non-finite value appeared.
    Numeric(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Argument(m) => write!(f, "argument error: {m}"),
            Error::Precondition(m) => write!(f, "precondition violated: {m}"),
            Error::Solver { what, iterations, residual } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl core::error::Error for Error {}
