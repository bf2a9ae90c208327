use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("matrix width mismatch: expected {expected} columns, found {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("conditional probability undefined: P[M = {m}] is zero")]
    UndefinedConditional { m: usize },

    #[error("attacker set violates the single-session eavesdropping model: {0}")]
    InvalidAttacker(String),

    #[error("{sessions} sessions exceed the pattern enumeration limit of {limit}")]
    TooManySessions { sessions: usize, limit: usize },

    #[error("row {row} of the transition kernel sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("chain has {} recurrent classes: {classes:?}", classes.len())]
    MultipleRecurrentClasses { classes: Vec<Vec<usize>> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("no arrivals: mean arrival rate is zero, delay is undefined")]
    ZeroArrivalRate,

    #[error("feedback is disabled (no-response mode, window = 0)")]
    NoResponseMode,

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
