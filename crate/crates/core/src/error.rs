use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The caller handed in something malformed: wrong dimensions, an action
    /// outside its set, a point outside the box, an unknown name.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The game definition itself breaks a standing assumption, e.g. a
    /// utility outside `[0, u_max]`.
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    /// An exhaustive enumeration would exceed the configured guard limit.
    #[error("enumeration of {count} items exceeds guard limit {limit}")]
    TooLarge { count: u128, limit: u64 },

    /// A round could not be completed; wraps the underlying failure.
    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
    Io(String),

    #[error("trace format: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_round(self, round: u64) -> Self {
        match self {
            e @ Error::Round { .. } => e,
            e => Error::Round {
                round,
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
