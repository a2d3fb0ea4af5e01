//! Independent checker for `.nspc` proof certificates.
//!
//! The checker trusts nothing in the certificate. It re-parses the network
//! and query files, recomputes the digest, walks every proof tree checking
//! its shape, and at each leaf rebuilds the leaf system from scratch (its
//! own interval pass, its own relaxation coefficients) before applying one
//! rule: the multipliers are nonnegative, cancel every variable, and leave
//! `0 ≤ c` with `c < 0`, or `0 < c` with `c ≤ 0` when a strict row carries
//! weight. There is no search and no LP solving here, and all arithmetic is
//! exact.
//!
//! Only file parsing is shared with the verifier.

mod system;

use nspc_core::certificates::{CertNode, CertSplit, ProofCertificate, FORMAT_VERSION};
use nspc_core::network::{Activation, Network};
use nspc_core::rational::{format_rational, parse_rational, Rational};
use nspc_core::verifier::{parse_queries, VerifyQuery};
use num_traits::{Signed, Zero};
use sha2::{Digest, Sha256};
use std::fmt;
use system::{leaf_rows, Fixed, Node};
use thiserror::Error;

/// Machine-readable rejection reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    DigestMismatch,
    MalformedTree,
    DuplicateSplit,
    IncompletePhaseCoverage,
    NegativeMultiplier,
    InvalidCombination,
    LeafSystemMismatch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 7] = [
        RejectReason::DigestMismatch,
        RejectReason::MalformedTree,
        RejectReason::DuplicateSplit,
        RejectReason::IncompletePhaseCoverage,
        RejectReason::NegativeMultiplier,
        RejectReason::InvalidCombination,
        RejectReason::LeafSystemMismatch,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::DigestMismatch => "digest-mismatch",
            RejectReason::MalformedTree => "malformed-tree",
            RejectReason::DuplicateSplit => "duplicate-split",
            RejectReason::IncompletePhaseCoverage => "incomplete-phase-coverage",
            RejectReason::NegativeMultiplier => "negative-multiplier",
            RejectReason::InvalidCombination => "invalid-combination",
            RejectReason::LeafSystemMismatch => "leaf-system-mismatch",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    /// `path` locates the offending node, e.g. `obligation 0/active(0,1)/lower(x0)`.
    Rejected {
        reason: RejectReason,
        path: String,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub verdict: Verdict,
    pub leaves_checked: usize,
    pub max_multiplier: Rational,
}

impl CheckResult {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    pub fn reason(&self) -> Option<RejectReason> {
        match &self.verdict {
            Verdict::Accepted => None,
            Verdict::Rejected { reason, .. } => Some(*reason),
        }
    }
}

/// The network or query file could not be read at all (a certificate for
/// it cannot be judged).
#[derive(Debug, Error)]
pub enum InputError {
    #[error("network file: {0}")]
    Network(String),
    #[error("query file: {0}")]
    Query(String),
}

struct Reject {
    reason: RejectReason,
    detail: String,
}

fn reject<T>(reason: RejectReason, detail: impl Into<String>) -> Result<T, Reject> {
    Err(Reject {
        reason,
        detail: detail.into(),
    })
}

struct Checker<'a> {
    net: &'a Network,
    leaves: usize,
    max_multiplier: Rational,
    path: Vec<String>,
}

/// Checks `cert_text` against the exact bytes of the network and query files.
pub fn check_certificate(cert_text: &str, network_bytes: &[u8], query_bytes: &[u8]) -> Result<CheckResult, InputError> {
    let net_text = std::str::from_utf8(network_bytes).map_err(|e| InputError::Network(e.to_string()))?;
    let net = Network::from_json_str(net_text).map_err(|e| InputError::Network(e.to_string()))?;
    let query_text = std::str::from_utf8(query_bytes).map_err(|e| InputError::Query(e.to_string()))?;
    let queries = parse_queries(query_text).map_err(|e| InputError::Query(e.to_string()))?;
    for (i, q) in queries.iter().enumerate() {
        if q.inputs() != net.input_dim() || q.outputs != net.output_dim() {
            return Err(InputError::Query(format!("query {i} does not match the network dimensions")));
        }
    }

    let mut c = Checker {
        net: &net,
        leaves: 0,
        max_multiplier: Rational::zero(),
        path: Vec::new(),
    };
    let verdict = match c.run(cert_text, network_bytes, query_bytes, &queries) {
        Ok(()) => Verdict::Accepted,
        Err(r) => Verdict::Rejected {
            reason: r.reason,
            path: c.path.join("/"),
            detail: r.detail,
        },
    };
    Ok(CheckResult {
        verdict,
        leaves_checked: c.leaves,
        max_multiplier: c.max_multiplier,
    })
}

fn digest(network_bytes: &[u8], query_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(b"nspc-digest-v1\n");
    h.update(network_bytes);
    h.update(b"\n");
    h.update(query_bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Checker<'_> {
    fn run(&mut self, cert_text: &str, net_bytes: &[u8], query_bytes: &[u8], queries: &[VerifyQuery]) -> Result<(), Reject> {
        let cert = match ProofCertificate::from_json_str(cert_text) {
            Ok(c) => c,
            Err(e) => return reject(RejectReason::MalformedTree, e.to_string()),
        };
        if cert.format_version != FORMAT_VERSION {
            return reject(
                RejectReason::MalformedTree,
                format!("unsupported format_version {}", cert.format_version),
            );
        }
        if cert.digest.algorithm != "sha256" || cert.digest.hex != digest(net_bytes, query_bytes) {
            return reject(RejectReason::DigestMismatch, "digest does not match the network and query bytes");
        }
        if cert.obligations.len() != queries.len() {
            return reject(
                RejectReason::MalformedTree,
                format!("{} proof trees for {} queries", cert.obligations.len(), queries.len()),
            );
        }
        for (i, (tree, q)) in cert.obligations.iter().zip(queries).enumerate() {
            self.path = vec![format!("obligation {i}")];
            self.node(tree, q, Node::root(self.net, q))?;
        }
        self.path.clear();
        Ok(())
    }

    fn node(&mut self, tree: &CertNode, query: &VerifyQuery, node: Node) -> Result<(), Reject> {
        match tree {
            CertNode::Leaf {
                multipliers, constant, ..
            } => self.leaf(multipliers, constant, query, &node),
            CertNode::Split { split, children } => {
                let names: [&str; 2];
                let mut kids: [Node; 2] = [node.clone(), node.clone()];
                let label: String;
                match split {
                    CertSplit::Relu { layer, neuron } => {
                        let (layer, neuron) = (*layer, *neuron);
                        let layers = self.net.layers();
                        if layer + 1 >= layers.len() || neuron >= layers[layer].outputs() {
                            return reject(
                                RejectReason::MalformedTree,
                                format!("no hidden neuron ({layer},{neuron})"),
                            );
                        }
                        if layers[layer].activation != Activation::Relu {
                            return reject(RejectReason::MalformedTree, format!("neuron ({layer},{neuron}) is not a ReLU"));
                        }
                        if node.phases[layer][neuron].is_some() {
                            return reject(
                                RejectReason::DuplicateSplit,
                                format!("neuron ({layer},{neuron}) is already split on this path"),
                            );
                        }
                        kids[0].phases[layer][neuron] = Some(Fixed::Active);
                        kids[1].phases[layer][neuron] = Some(Fixed::Inactive);
                        names = ["active", "inactive"];
                        label = format!("({layer},{neuron})");
                    }
                    CertSplit::Input { var, at } => {
                        let var = *var;
                        let Some((lo, hi)) = node.input_box.get(var) else {
                            return reject(RejectReason::MalformedTree, format!("no input x{var}"));
                        };
                        let at = match parse_rational(at) {
                            Ok(a) if *lo <= a && a <= *hi => a,
                            _ => {
                                return reject(
                                    RejectReason::MalformedTree,
                                    format!("bisection point `{at}` is not inside the box of x{var}"),
                                )
                            }
                        };
                        kids[0].input_box[var].1 = at.clone();
                        kids[1].input_box[var].0 = at;
                        names = ["lower", "upper"];
                        label = format!("(x{var})");
                    }
                }
                for c in children {
                    if !names.contains(&c.branch.as_str()) {
                        return reject(RejectReason::MalformedTree, format!("unexpected branch `{}`", c.branch));
                    }
                }
                let [first, second] = kids;
                for (name, kid) in names.into_iter().zip([first, second]) {
                    let matching: Vec<_> = children.iter().filter(|c| c.branch == name).collect();
                    match matching.as_slice() {
                        [only] => {
                            self.path.push(format!("{name}{label}"));
                            self.node(&only.node, query, kid)?;
                            self.path.pop();
                        }
                        [] => {
                            return reject(RejectReason::IncompletePhaseCoverage, format!("branch `{name}` is missing"))
                        }
                        _ => {
                            return reject(RejectReason::MalformedTree, format!("branch `{name}` appears more than once"))
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn leaf(&mut self, multipliers: &[String], constant: &str, query: &VerifyQuery, node: &Node) -> Result<(), Reject> {
        self.leaves += 1;
        let (n_vars, rows) = leaf_rows(self.net, query, node);
        if multipliers.len() != rows.len() {
            return reject(
                RejectReason::LeafSystemMismatch,
                format!("{} multipliers for a leaf system of {} rows", multipliers.len(), rows.len()),
            );
        }
        let mut lambda = Vec::with_capacity(rows.len());
        for (i, m) in multipliers.iter().enumerate() {
            match parse_rational(m) {
                Ok(v) if v.is_negative() => {
                    return reject(RejectReason::NegativeMultiplier, format!("multiplier {i} is {m}"))
                }
                Ok(v) => lambda.push(v),
                Err(_) => return reject(RejectReason::MalformedTree, format!("multiplier {i} is not a rational: `{m}`")),
            }
        }
        for v in &lambda {
            if *v > self.max_multiplier {
                self.max_multiplier = v.clone();
            }
        }

        let mut combined = vec![Rational::zero(); n_vars];
        let mut c = Rational::zero();
        let mut strict_used = false;
        for (l, r) in lambda.iter().zip(&rows) {
            if l.is_zero() {
                continue;
            }
            for (v, a) in &r.terms {
                combined[*v] += l * a;
            }
            c += l * &r.rhs;
            strict_used |= r.strict;
        }
        if let Some(v) = combined.iter().position(|a| !a.is_zero()) {
            return reject(
                RejectReason::InvalidCombination,
                format!("variable {v} keeps coefficient {}", format_rational(&combined[v])),
            );
        }
        if !(c.is_negative() || (c.is_zero() && strict_used)) {
            return reject(
                RejectReason::InvalidCombination,
                format!("derived constant {} is not a contradiction", format_rational(&c)),
            );
        }
        if parse_rational(constant).ok().as_ref() != Some(&c) {
            return reject(
                RejectReason::InvalidCombination,
                format!("claimed constant {constant} but the combination gives {}", format_rational(&c)),
            );
        }
        Ok(())
    }
}
