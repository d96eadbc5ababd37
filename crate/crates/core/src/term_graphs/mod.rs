//! The graph presentation layer: the ω-term algebra, vertex addressing,
//! truncation to finite graphs, and lazy adjacency.

mod addr;
mod finite;
mod term;

pub mod examples;

pub use addr::{AddrPattern, IdxPat, PatMeet, Step, StepPat, UPattern, VertexAddr};
pub use finite::FiniteGraph;
pub use term::{Card, Degree, OmegaTerm};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("dangling address: {0}")]
    DanglingAddress(String),
    #[error("duplicate label: {0}")]
    DuplicateLabel(String),
    #[error("loop edge at: {0}")]
    LoopEdge(String),
    #[error("bad address syntax: {0}")]
    AddrSyntax(String),
    #[error("unresolvable pattern: {0}")]
    UnresolvablePattern(String),
    #[error("term is disconnected")]
    Disconnected,
}

/// Parse and validate a term from its JSON description.
pub fn validate_term(raw: &str) -> Result<OmegaTerm, TermError> {
    let term: OmegaTerm =
        serde_json::from_str(raw).map_err(|e| TermError::AddrSyntax(e.to_string()))?;
    term.validate()?;
    Ok(term)
}
