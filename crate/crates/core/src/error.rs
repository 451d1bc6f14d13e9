use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("capacity exhausted: {0}")]
    Capacity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("witness does not satisfy the axiom's hypotheses: {0}")]
    Witness(String),

    #[error("irreversibility violated: {0}")]
    Irreversibility(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("non-monotone verdicts: {0}")]
    Monotonicity(String),
}

impl Error {
    /// True for errors caused by a bad problem / rule / scenario configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
