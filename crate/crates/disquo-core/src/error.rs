//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration failed validation before any simulation ran.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A scheduler emitted an input or output schedule that violates the
    /// transmission constraints (write to an occupied buffer, drain of an
    /// empty one, or a move from an empty queue). The engine re-checks every
    /// slot, so this indicates a scheduler bug.
    #[error("protocol violation at slot {slot}: {detail}")]
    ProtocolViolation { slot: u64, detail: String },

    /// Arrival rates with a row or column sum at or above one.
    #[error("inadmissible traffic: {0}")]
    Inadmissible(String),

    /// Exact chain analysis requested on a state space too large to handle.
    #[error("state space too large: {0}")]
    Capacity(String),

    /// The transition matrix is not strongly connected on positive entries.
    #[error("chain is reducible")]
    ReducibleChain,

    /// A numeric routine failed to meet its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
