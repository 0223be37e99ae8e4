//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the simulation framework.
#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Advancing an environment past its horizon.
    #[error("sequence error: {0}")]
    Sequence(String),

    /// An allocation or reallocation action violates the budget constraints.
    #[error("infeasible allocation: {0}")]
    Allocation(String),

    /// Mismatched dimensions or otherwise malformed inputs.
    #[error("input error: {0}")]
    Input(String),

    #[error("unsupported detection threshold {0}: supported values are 1, 2, 3")]
    UnsupportedThreshold(u8),

    /// A probability input sits on a singular boundary (q = 0 or q = 1).
    #[error("singular input: {0}")]
    Singular(String),

    /// Closed-form solution undefined for the given arguments.
    #[error("domain error: {0}")]
    Domain(String),

    /// Bisection could not find a sign-changing bracket.
    #[error("bracket error: {0}")]
    Bracket(String),

    /// Bisection exhausted its iteration budget.
    #[error("did not converge: {0}")]
    Convergence(String),

    /// Ground-truth probabilities were passed to (or withheld from) the
    /// wrong policy kind.
    #[error("contract violation: {0}")]
    Contract(String),

    /// All paired differences are zero; the signed-rank test is undefined.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),
}

impl ArenaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ArenaError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ArenaError>;
