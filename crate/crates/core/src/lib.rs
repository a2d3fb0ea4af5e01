//! Proof-carrying toolchain for small feedforward ReLU networks.
//!
//! Properties written in the `.nsp` language compile into differentiable
//! training objectives ([`dl_logic`], [`trainer`]) and into exact
//! reachability queries for a branch-and-bound verifier ([`verifier`]) whose
//! proofs are emitted as independently checkable certificates
//! ([`certificates`]). [`cps_harness`] closes the loop for a neural
//! car-following controller.

pub mod certificates;
pub mod cps_harness;
pub mod dl_logic;
pub mod network;
pub mod rational;
pub mod spec_lang;
pub mod trainer;
pub mod verifier;
