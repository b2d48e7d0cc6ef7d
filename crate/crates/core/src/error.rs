use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Fock basis too small: {0}")]
    BasisTooSmall(String),

    #[error("steady state is not unique: {0}")]
    Degenerate(String),

    #[error("steady-state solve failed: {0}")]
    SteadyState(String),

    #[error("truncation not converged: {0}")]
    Truncation(String),

    #[error("integration unstable: {0}")]
    Unstable(String),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("trajectory aborted at step {step}: {reason}")]
    Trajectory { step: u64, reason: String },

    #[error("no carrier: {0}")]
    NoCarrier(String),

    #[error("rejected: {0}")]
    Rejected(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("params hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("refusing to overwrite {0} (pass --force)")]
    Exists(PathBuf),

    #[error("table node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<Error>,
    },

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
