use thiserror::Error;

/// Errors raised by the coupling kernel.
#[derive(Debug, Error)]
pub enum Error {
    /// A parametric coordinate lies outside the domain of a knot vector.
    #[error("parameter {value} outside domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A linear system could not be solved reliably.
    #[error("numerical failure: {message} (condition estimate {condition:.3e})")]
    Numerical { message: String, condition: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("transport failure: {0}")]
    Transport(#[from] std::io::Error),

    /// Coupling sub-iterations did not reach the requested tolerance.
    #[error("no convergence in step {step} after {} iterations (last residual {:.3e})", residuals.len(), residuals.last().copied().unwrap_or(f64::NAN))]
    Convergence { step: usize, residuals: Vec<f64> },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
