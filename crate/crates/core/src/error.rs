use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The instance violates a structural invariant (schema, normalization,
    /// monotonicity, probability mass).
    #[error("invalid instance: {0}")]
    Invalid(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("observation has zero probability at round {round}")]
    ZeroProbability { round: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Caller passed arguments outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("policy has no action for node {0}")]
    UnmappedNode(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        Error::SizeGuard(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
