use thiserror::Error;

/// Errors raised by the solvers and their configuration checks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on user-supplied configuration was violated.
    /// `key` names the offending setting (dotted path where applicable).
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// Two objects that must share a shape do not.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An argument lies outside the domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An implicit time step could not be solved.
    #[error("singular implicit system at level {level}, node {node}")]
    Singular { level: usize, node: usize },

    /// A non-finite value entered a computation.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A numerical procedure broke down (for example a CG breakdown).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Shape {
            context,
            expected,
            actual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
