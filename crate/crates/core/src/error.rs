use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    /// The requested count lies outside the support of the distribution.
    /// This is not the same as a probability of zero inside the support.
    #[error("k = {k} lies outside the support [{lo}, {hi}]")]
    OutOfSupport { k: u64, lo: u64, hi: u64 },

    #[error(
        "lattice of {points} points exceeds the budget of {budget}; \
         rerun with a stride of at least {suggested_stride}"
    )]
    Budget {
        points: u128,
        budget: u64,
        suggested_stride: u64,
    },
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
