//! Proof certificate files (`.nspc`).
//!
//! A certificate is JSON:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "digest": {"algorithm": "sha256", "hex": "…"},
//!   "obligations": [
//!     {"node": "split",
//!      "split": {"kind": "relu", "layer": 0, "neuron": 1},
//!      "children": [
//!        {"branch": "active", "node": {"node": "leaf", "kind": "lp",
//!                                      "multipliers": ["0", "1/2", …], "constant": "-1"}},
//!        {"branch": "inactive", "node": {…}}]}
//!   ]
//! }
//! ```
//!
//! `obligations` holds one proof tree per query of the query file, in file
//! order. Splits are `{"kind": "relu", "layer", "neuron"}` (children
//! `active`/`inactive`) or `{"kind": "input", "var", "at"}` (children
//! `lower`/`upper`, covering `[lo, at]` and `[at, hi]`). A leaf lists one
//! multiplier per row of its canonical leaf system (see
//! [`crate::verifier::leaf`]) and the constant `c` of the derived
//! inequality `0 ≤ c` (or `0 < c` when a strict row is used). Rationals are
//! strings.
//!
//! The digest is SHA-256 over `"nspc-digest-v1\n"`, the network file bytes,
//! a newline, and the query file bytes, rendered as lowercase hex.

use crate::rational::format_rational;
use crate::network::Network;
use crate::verifier::{node_system, LeafKind, ProofNode, Split, VerifyQuery};
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;
pub const DIGEST_ALGORITHM: &str = "sha256";
const DIGEST_DOMAIN: &[u8] = b"nspc-digest-v1\n";

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("certificate is not valid JSON for this format: {0}")]
    Json(#[from] serde_json::Error),
    #[error("leaf multiplier count {found} does not match the leaf system ({expected} rows)")]
    LeafSize { expected: usize, found: usize },
    #[error("{proofs} proof trees for {queries} queries")]
    Count { queries: usize, proofs: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigestField {
    pub algorithm: String,
    pub hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertSplit {
    Relu { layer: usize, neuron: usize },
    Input { var: usize, at: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertChild {
    pub branch: String,
    pub node: CertNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum CertNode {
    Split {
        split: CertSplit,
        children: Vec<CertChild>,
    },
    Leaf {
        kind: String,
        multipliers: Vec<String>,
        constant: String,
    },
}

impl CertNode {
    pub fn leaves(&self) -> usize {
        match self {
            CertNode::Leaf { .. } => 1,
            CertNode::Split { children, .. } => children.iter().map(|c| c.node.leaves()).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofCertificate {
    pub format_version: u32,
    pub digest: DigestField,
    pub obligations: Vec<CertNode>,
}

impl ProofCertificate {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<ProofCertificate, CertificateError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn leaves(&self) -> usize {
        self.obligations.iter().map(CertNode::leaves).sum()
    }
}

/// Lowercase hex SHA-256 binding a certificate to the exact bytes of its
/// network and query files.
pub fn digest_hex(network_bytes: &[u8], query_bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(DIGEST_DOMAIN);
    h.update(network_bytes);
    h.update(b"\n");
    h.update(query_bytes);
    hex::encode(h.finalize())
}

/// Serializes one proof tree per query (`proofs[i]` refutes `queries[i]`).
pub fn emit_certificate(
    net: &Network,
    queries: &[VerifyQuery],
    proofs: &[ProofNode],
    network_bytes: &[u8],
    query_bytes: &[u8],
) -> Result<ProofCertificate, CertificateError> {
    if queries.len() != proofs.len() {
        return Err(CertificateError::Count {
            queries: queries.len(),
            proofs: proofs.len(),
        });
    }
    let obligations = queries
        .iter()
        .zip(proofs)
        .map(|(q, p)| encode(net, q, p, &mut Vec::new()))
        .collect::<Result<_, _>>()?;
    Ok(ProofCertificate {
        format_version: FORMAT_VERSION,
        digest: DigestField {
            algorithm: DIGEST_ALGORITHM.into(),
            hex: digest_hex(network_bytes, query_bytes),
        },
        obligations,
    })
}

/// `path` holds the splits above the node with the branch taken at each
/// (0 = active/lower, 1 = inactive/upper).
fn encode(
    net: &Network,
    query: &VerifyQuery,
    node: &ProofNode,
    path: &mut Vec<(Split, usize)>,
) -> Result<CertNode, CertificateError> {
    match node {
        ProofNode::Leaf { kind, witness } => {
            let sys = node_system(net, query, path);
            if sys.rows.len() != witness.multipliers.len() {
                return Err(CertificateError::LeafSize {
                    expected: sys.rows.len(),
                    found: witness.multipliers.len(),
                });
            }
            let constant = witness
                .multipliers
                .iter()
                .zip(&sys.rows)
                .map(|(l, r)| l * &r.rhs)
                .sum();
            Ok(CertNode::Leaf {
                kind: match kind {
                    LeafKind::Interval => "interval",
                    LeafKind::Lp => "lp",
                }
                .into(),
                multipliers: witness.multipliers.iter().map(format_rational).collect(),
                constant: format_rational(&constant),
            })
        }
        ProofNode::Split { split, children } => {
            let (cert_split, names) = match split {
                Split::Relu { layer, neuron } => (
                    CertSplit::Relu {
                        layer: *layer,
                        neuron: *neuron,
                    },
                    ["active", "inactive"],
                ),
                Split::Input { var, at } => (
                    CertSplit::Input {
                        var: *var,
                        at: format_rational(at),
                    },
                    ["lower", "upper"],
                ),
            };
            let mut out = Vec::with_capacity(2);
            for (side, (child, name)) in children.iter().zip(names).enumerate() {
                path.push((split.clone(), side));
                let node = encode(net, query, child, path);
                path.pop();
                out.push(CertChild {
                    branch: name.into(),
                    node: node?,
                });
            }
            Ok(CertNode::Split {
                split: cert_split,
                children: out,
            })
        }
    }
}
