use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid {what}: {detail}")]
    Invariant { what: &'static str, detail: String },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("scenario mismatch: functional is {expected}, behavior is {found}")]
    ScenarioMismatch { expected: String, found: String },

    #[error("scenario too large: {strategies} deterministic strategy pairs exceed the cap of {cap}")]
    ScenarioTooLarge { strategies: f64, cap: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("relaxation too large: {count} {what} exceed the cap of {cap}; {hint}")]
    TooLarge {
        what: &'static str,
        count: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("inconsistent equality pins: {0}")]
    InconsistentPins(String),

    #[error("solver did not reach optimality: {0}")]
    Solver(String),

    #[error("no threshold in range [{lo}, {hi}]: {reason}")]
    NoThreshold { lo: f64, hi: f64, reason: String },

    #[error("non-commuting pair in {party} measurement {measurement}: {detail}")]
    NonCommuting {
        party: &'static str,
        measurement: usize,
        detail: String,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
