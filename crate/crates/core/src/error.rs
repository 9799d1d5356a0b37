use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, range, emptiness).
    #[error("contract violation: {0}")]
    Contract(String),
    /// A quantity left the domain where it is defined (non-PD covariance, NaN loss, ...).
    #[error("numerical domain error: {0}")]
    Numerical(String),
    #[error("degenerate Householder direction: |v| = {norm:e} is below {min:e}")]
    DegenerateDirection { norm: f64, min: f64 },
    /// An optimizer refused to apply non-finite gradients; parameters were left untouched.
    #[error("poisoned update: non-finite gradient in `{0}`")]
    PoisonedUpdate(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing dependency: {0}")]
    Dependency(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by numerics rather than by the caller or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::PoisonedUpdate(_) | Error::DegenerateDirection { .. }
        )
    }
}
