//! Differentiable logics: compiling typed formulas into training losses.
//!
//! Three interpretations are supported. Gödel and Łukasiewicz logic map
//! formulas into `[0, 1]` with `1` meaning true; the Lawvere loss logic maps
//! them into `[0, ∞)` with `0` meaning true. Quantifiers are grounded by
//! aggregating over sampled domain points, either with min/max or with
//! power means.

mod arith;
mod eval;

pub use arith::{Arith, ExactArith, FloatArith, Tape};
pub use eval::{
    conj, disj, eval_loss, eval_loss_exact, neg, power_mean, grad_check, grad_loss, holds_on_samples, satisfaction_count, value_and_grad,
    value_and_grad_params,
    GradCheckReport,
};

use crate::network::Network;
use crate::rational::{ratio, Rational};
use crate::spec_lang::{Formula, NetworkDecl, QuantDomain, Span, Term, TypedSpec};
use num_traits::Signed;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogicError {
    #[error("{span}: unsupported construct: {message}")]
    Unsupported { message: String, span: Span },
    #[error("loss terms may reference one network, found {0:?}")]
    MultipleNetworks(Vec<String>),
    #[error("unknown property {0}")]
    UnknownProperty(String),
    #[error("sampling exhausted: {accepted} of {needed} points accepted after {attempts} attempts")]
    SamplingExhausted {
        accepted: usize,
        needed: usize,
        attempts: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid logic configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Domain(String),
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic {
    Godel,
    Lukasiewicz,
    LawvereLoss,
}

impl FromStr for Logic {
    type Err = LogicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "godel" | "gödel" => Ok(Logic::Godel),
            "lukasiewicz" | "łukasiewicz" => Ok(Logic::Lukasiewicz),
            "lawvere" | "lawvereloss" | "lawvere_loss" => Ok(Logic::LawvereLoss),
            other => Err(LogicError::InvalidConfig(format!(
                "unknown logic `{other}` (expected godel, lukasiewicz or lawvere)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantSemantics {
    MinMax,
    /// Power mean with this (finite, nonzero) exponent magnitude.
    PMean(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicConfig {
    pub logic: Logic,
    pub quantifier: QuantSemantics,
    /// Smoothing width τ of `[0,1]`-valued atoms.
    pub tau: Rational,
    /// Replaces smoothed atoms by exact 0/1 indicators (no gradient).
    pub sharp_atoms: bool,
    /// Lawvere conjunction as multiplication instead of addition.
    pub lawvere_product: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LogicConfig {
    fn default() -> Self {
        LogicConfig {
            logic: Logic::LawvereLoss,
            quantifier: QuantSemantics::MinMax,
            tau: ratio(1, 10),
            sharp_atoms: false,
            lawvere_product: false,
            samples: 512,
            seed: 0,
        }
    }
}

impl LogicConfig {
    pub fn validate(&self) -> Result<(), LogicError> {
        if let QuantSemantics::PMean(p) = self.quantifier {
            if !p.is_finite() || p == 0.0 {
                return Err(LogicError::InvalidConfig(format!("p must be finite and nonzero, got {p}")));
            }
        }
        if !self.tau.is_positive() {
            return Err(LogicError::InvalidConfig("tau must be positive".into()));
        }
        if self.samples == 0 {
            return Err(LogicError::InvalidConfig("samples must be positive".into()));
        }
        Ok(())
    }
}

/// Compiled loss structure. Quantifier nodes refer to sample sets by index.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Atom(crate::spec_lang::Atom),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Not(Box<Node>),
    /// Lawvere implication: `body` counts only where `cond` has loss 0.
    Guard { cond: Box<Node>, body: Box<Node> },
    Quant {
        id: usize,
        forall: bool,
        vars: Vec<String>,
        body: Box<Node>,
    },
    /// Mean over pairs of the squared output error.
    Mse { data: Vec<(Vec<Rational>, Vec<Rational>)> },
}

/// A quantifier's grounding data.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantInfo {
    pub vars: Vec<String>,
    pub domain: QuantDomain,
}

/// A closed loss expression over one network's parameters and the sampled
/// quantifier points.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerm {
    pub(crate) root: Node,
    pub config: LogicConfig,
    pub source: Option<Formula>,
    pub(crate) network: Option<NetworkDecl>,
    pub quantifiers: Vec<QuantInfo>,
    pub(crate) constants: HashMap<String, Rational>,
}

impl LossTerm {
    pub fn network(&self) -> Option<&NetworkDecl> {
        self.network.as_ref()
    }

    /// Spec constants visible to quantifier side constraints.
    pub fn constants(&self) -> &HashMap<String, Rational> {
        &self.constants
    }

    pub(crate) fn check_network(&self, net: &Network) -> Result<(), LogicError> {
        if let Some(decl) = &self.network {
            if decl.input_dim != net.input_dim() || decl.output_dim != net.output_dim() {
                return Err(LogicError::Dimension(format!(
                    "loss expects {} as {} -> {}, network is {} -> {}",
                    decl.name,
                    decl.input_dim,
                    decl.output_dim,
                    net.input_dim(),
                    net.output_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Sampled points for every quantifier of a [`LossTerm`], by quantifier index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub sets: Vec<Vec<Vec<Rational>>>,
}

/// Compiles a property of `spec` by name.
pub fn compile_property(spec: &TypedSpec, name: &str, cfg: &LogicConfig) -> Result<LossTerm, LogicError> {
    let prop = spec
        .property(name)
        .ok_or_else(|| LogicError::UnknownProperty(name.to_string()))?;
    compile_loss(spec, &prop.formula, cfg)
}

/// Structural translation of a closed formula under `cfg`.
pub fn compile_loss(spec: &TypedSpec, formula: &Formula, cfg: &LogicConfig) -> Result<LossTerm, LogicError> {
    cfg.validate()?;
    let mut nets = Vec::new();
    formula.visit_atoms(&mut |a| {
        for t in [&a.lhs, &a.rhs] {
            t.visit(&mut |s| {
                if let Term::NetApply { net, .. } = s {
                    if !nets.contains(net) {
                        nets.push(net.clone());
                    }
                }
            });
        }
    });
    if nets.len() > 1 {
        return Err(LogicError::MultipleNetworks(nets));
    }
    let network = match nets.first() {
        Some(n) => Some(
            spec.network(n)
                .cloned()
                .ok_or_else(|| LogicError::Dimension(format!("undeclared network {n}")))?,
        ),
        None => None,
    };
    let mut quantifiers = Vec::new();
    let root = compile_node(formula, cfg.logic, &mut quantifiers)?;
    Ok(LossTerm {
        root,
        config: cfg.clone(),
        source: Some(formula.clone()),
        network,
        quantifiers,
        constants: spec.constants().clone(),
    })
}

fn first_span(f: &Formula) -> Span {
    match f {
        Formula::Atom(a) => a.span,
        Formula::And(a, _) | Formula::Or(a, _) | Formula::Implies(a, _) | Formula::Not(a) => first_span(a),
        Formula::Forall(q) | Formula::Exists(q) => q.span,
    }
}

fn compile_node(f: &Formula, logic: Logic, quants: &mut Vec<QuantInfo>) -> Result<Node, LogicError> {
    let bx = |n: Node| Box::new(n);
    Ok(match f {
        Formula::Atom(a) => Node::Atom(a.clone()),
        Formula::And(a, b) => Node::And(bx(compile_node(a, logic, quants)?), bx(compile_node(b, logic, quants)?)),
        Formula::Or(a, b) => Node::Or(bx(compile_node(a, logic, quants)?), bx(compile_node(b, logic, quants)?)),
        Formula::Not(a) => {
            if logic == Logic::LawvereLoss {
                return Err(LogicError::Unsupported {
                    message: "negation has no Lawvere loss interpretation".into(),
                    span: first_span(a),
                });
            }
            Node::Not(bx(compile_node(a, logic, quants)?))
        }
        Formula::Implies(p, q) => {
            let p = compile_node(p, logic, quants)?;
            let q = compile_node(q, logic, quants)?;
            if logic == Logic::LawvereLoss {
                Node::Guard {
                    cond: bx(p),
                    body: bx(q),
                }
            } else {
                Node::Or(bx(Node::Not(bx(p))), bx(q))
            }
        }
        Formula::Forall(q) | Formula::Exists(q) => {
            let id = quants.len();
            quants.push(QuantInfo {
                vars: q.vars.clone(),
                domain: q.domain.clone(),
            });
            Node::Quant {
                id,
                forall: matches!(f, Formula::Forall(_)),
                vars: q.vars.clone(),
                body: bx(compile_node(&q.body, logic, quants)?),
            }
        }
    })
}

/// Mean squared error of `net` against `dataset` (squared errors summed over
/// outputs, averaged over pairs).
pub fn make_regression_loss(
    net: &Network,
    dataset: &[(Vec<Rational>, Vec<Rational>)],
) -> Result<LossTerm, LogicError> {
    if dataset.is_empty() {
        return Err(LogicError::EmptyDataset);
    }
    for (i, (x, y)) in dataset.iter().enumerate() {
        if x.len() != net.input_dim() || y.len() != net.output_dim() {
            return Err(LogicError::Dimension(format!(
                "dataset pair {i} has shape {} -> {}, network is {} -> {}",
                x.len(),
                y.len(),
                net.input_dim(),
                net.output_dim()
            )));
        }
    }
    Ok(LossTerm {
        root: Node::Mse {
            data: dataset.to_vec(),
        },
        config: LogicConfig::default(),
        source: None,
        network: Some(NetworkDecl {
            name: "f".into(),
            input_dim: net.input_dim(),
            output_dim: net.output_dim(),
            span: Span::default(),
        }),
        quantifiers: Vec::new(),
        constants: HashMap::new(),
    })
}

/// Draws `n` points uniformly from the box of `dom`, keeping those that
/// satisfy every side constraint exactly.
pub fn sample_domain(
    vars: &[String],
    dom: &QuantDomain,
    constants: &HashMap<String, Rational>,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<Rational>>, LogicError> {
    sample_stream(vars, dom, constants, n, seed, 0)
}

fn sample_stream(
    vars: &[String],
    dom: &QuantDomain,
    constants: &HashMap<String, Rational>,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Vec<Rational>>, LogicError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let denom = Rational::from_integer((1u64 << 32).into());
    let max_attempts = n.saturating_mul(100);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < max_attempts {
        attempts += 1;
        let point: Vec<Rational> = dom
            .bounds
            .iter()
            .map(|(lo, hi)| {
                let k = Rational::from_integer(rng.next_u32().into());
                lo + (hi - lo) * k / &denom
            })
            .collect();
        let lookup = |name: &str| {
            vars.iter()
                .position(|v| v == name)
                .map(|i| point[i].clone())
                .or_else(|| constants.get(name).cloned())
        };
        let ok = dom
            .side_constraints
            .iter()
            .all(|a| a.holds_exact(&lookup, &mut |_, _| None) == Some(true));
        if ok {
            out.push(point);
        }
    }
    if out.len() < n {
        return Err(LogicError::SamplingExhausted {
            accepted: out.len(),
            needed: n,
            attempts,
        });
    }
    Ok(out)
}

/// Samples every quantifier of `term` (`term.config.samples` points each),
/// each quantifier on its own deterministic stream.
pub fn draw_samples(term: &LossTerm, seed: u64) -> Result<Samples, LogicError> {
    let sets = term
        .quantifiers
        .iter()
        .enumerate()
        .map(|(i, q)| sample_stream(&q.vars, &q.domain, &term.constants, term.config.samples, seed, i as u64))
        .collect::<Result<_, _>>()?;
    Ok(Samples { sets })
}
