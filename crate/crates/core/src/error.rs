use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("theorem inapplicable: {0}")]
    TheoremInapplicable(String),

    /// Quadrature or linear algebra failed; `partial` carries the best
    /// estimate reached before giving up, when there is one.
    #[error("numerical error: {message}")]
    Numerical { message: String, partial: Option<f64> },

    #[error("instance exceeds desk scale: {0}")]
    ScaleLimit(String),

    #[error("refusing to sample: {0}")]
    ProprietyGate(String),

    #[error("non-finite log density during sampling at iteration {iteration}: {state}")]
    NonFinite { iteration: usize, state: String },
}

impl Error {
    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            partial: None,
        }
    }
}
