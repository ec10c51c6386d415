use thiserror::Error;

/// Errors raised by the model, solvers and I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant. `path` is the dotted
    /// field path, e.g. `sim.decay.t1qp`.
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },

    /// A function was evaluated outside of its domain.
    #[error("domain error in {func}: {message}")]
    Domain { func: &'static str, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("bootstrap: {failed} of {total} resamples failed to fit")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("config not found: {0}")]
    ConfigNotFound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn domain(func: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            func,
            message: message.into(),
        }
    }
}
