//! Complete verification of network properties.
//!
//! Properties compile to [`VerifyQuery`]s (the negation of the property as
//! a reachability question). [`bnb_verify`] decides a query by interval
//! bound propagation plus branch and bound over ReLU phases, with an exact
//! rational LP at every node. Every refuted node carries a multiplier
//! witness over the node's canonical [`LinearSystem`](lp::LinearSystem), so a
//! `Verified` result is a proof tree that can be rechecked without search.

pub mod bnb;
pub mod export;
pub mod interval;
pub mod leaf;
pub mod lp;
pub mod query;

pub use bnb::{bnb_verify, node_system, Counterexample, LeafKind, Limits, ProofNode, Split, Stats, VerifyResult};
pub use export::{export_queries, export_query, parse_queries, QueryParseError};
pub use interval::{interval_propagate, interval_propagate_with, relax_quadratic, IntervalBox, Phase};
pub use lp::{lp_feasible, FarkasWitness, LinearSystem, LpError, LpOutcome};
pub use query::{compile_property_queries, compile_queries, LinearRow, OutputRow, QuadRow, VerifyQuery};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("unsupported property shape: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("internal verifier error: {0}")]
    Internal(String),
}
