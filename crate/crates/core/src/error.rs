use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity was requested that the declared regime does not define.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// An iterative method failed to converge or a consistency check failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("draw budget exceeded: {requested} draws requested, budget is {budget}")]
    Budget { requested: u128, budget: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
