use thiserror::Error;

use crate::equilibrium::ProfileIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("kernel is missing the row for (state {state}, action {action}, reaction {reaction})")]
    MissingKernelRow {
        state: String,
        action: String,
        reaction: String,
    },

    #[error("kernel row for (state {state}, action {action}, reaction {reaction}) has {found} entries, expected {expected}")]
    KernelRowLength {
        state: String,
        action: String,
        reaction: String,
        found: usize,
        expected: usize,
    },

    #[error("kernel rows are not probability vectors: {0}")]
    InvalidKernel(String),

    #[error("missing or non-finite utility: {0}")]
    InvalidUtility(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("inconsistent observation: mixed likelihood {0:e} is zero")]
    InconsistentObservation(f64),

    #[error("history of length {history} exceeds strategy depth {depth}")]
    DepthExceeded { history: usize, depth: usize },

    #[error("horizon must be at least 1")]
    EmptyHorizon,

    #[error("joint profile count {count} exceeds the enumeration limit {limit}")]
    TooManyProfiles { count: u128, limit: u128 },

    #[error("no pure Bayesian-Nash equilibrium; best-response cycle {cycle:?}")]
    NoPureEquilibrium { cycle: Vec<ProfileIndex> },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
