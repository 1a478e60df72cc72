use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mark of kind {found} is incompatible with model {model}")]
    IncompatibleMark { model: &'static str, found: &'static str },

    #[error("configuration has {count} points, exceeding the hard cap of {cap}")]
    ConfigTooLarge { count: usize, cap: usize },

    #[error("configuration is not simple: duplicate point {0}")]
    DuplicatePoint(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "rejection sampler acceptance rate fell below the floor {floor:e} after {trials} trials; \
         use a smaller window"
    )]
    AcceptanceTooLow { floor: f64, trials: u64 },

    #[error("model does not satisfy the cluster locality assumption required for coupling")]
    NotClusterLocal,

    #[error("coupling recursion exceeded {limit} layers")]
    LayerOverflow { limit: usize },

    #[error("n too small for target c (c = {c}, n = {n})")]
    TargetTooLarge { c: f64, n: f64 },

    #[error("root bracket failure: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
