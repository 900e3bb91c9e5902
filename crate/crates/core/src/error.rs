use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed input: bad indices, wrong lengths, schema mismatches.
    #[error("input error at {path}: {message}")]
    Input { path: String, message: String },

    /// A domain invariant does not hold (monotonicity, probability sums, ...).
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },

    /// The request exceeds a documented size limit.
    #[error("capacity exceeded: {what} (limit {limit}, requested {requested})")]
    Capacity {
        what: String,
        limit: u64,
        requested: u64,
    },

    /// A policy revisits a state forever without progress.
    #[error("policy does not terminate: buying entry {entry} at state {state} never changes the held set")]
    NonTerminating { state: String, entry: usize },

    /// Generic failure of a randomized or iterative procedure.
    #[error("{0}")]
    Failed(String),
}

impl Error {
    pub fn input(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Input {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn invariant(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn capacity(what: impl Into<String>, limit: u64, requested: u64) -> Self {
        Error::Capacity {
            what: what.into(),
            limit,
            requested,
        }
    }

    /// True for errors caused by the caller's data rather than size limits.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Input { .. } | Error::Invariant { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
