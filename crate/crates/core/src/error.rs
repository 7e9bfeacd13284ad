use thiserror::Error;

/// Errors raised by the simulator's numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite or out-of-range parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("negative propagation distance {0} m (use back_propagate for reverse propagation)")]
    NegativeDistance(f64),

    #[error("invalid label `{0}` (expected psi00..psi11 or phi00..phi11)")]
    InvalidLabel(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Rejects NaN/inf parameters.
pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}

/// Rejects non-finite or non-positive parameters.
pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
