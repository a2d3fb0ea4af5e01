//! Depth-first branch and bound over ReLU phases and input bisections.

use super::interval::{interval_propagate_with, no_phases, NeuronState, Phase, Phases};
use super::leaf::{build_leaf_system, interval_witness};
use super::lp::{lp_feasible, FarkasWitness, LinearSystem, LpOutcome};
use super::query::VerifyQuery;
use super::VerifyError;
use crate::network::Network;
use crate::rational::Rational;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_splits: usize,
    pub timeout: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_splits: 20_000,
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LeafKind {
    /// Refuted by interval bounds alone.
    Interval,
    /// Refuted by the LP engine.
    Lp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    Relu { layer: usize, neuron: usize },
    /// Bisection of input `var` at `at`: children cover `[lo, at]` and `[at, hi]`.
    Input { var: usize, at: Rational },
}

/// Proof tree. `Split` children are `[active, inactive]` for ReLU splits
/// and `[lower, upper]` for input splits.
#[derive(Debug, Clone, PartialEq)]
pub enum ProofNode {
    Leaf { kind: LeafKind, witness: FarkasWitness },
    Split { split: Split, children: Box<[ProofNode; 2]> },
}

impl ProofNode {
    pub fn leaves(&self) -> usize {
        match self {
            ProofNode::Leaf { .. } => 1,
            ProofNode::Split { children, .. } => children.iter().map(ProofNode::leaves).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub input: Vec<Rational>,
    pub output: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stats {
    pub splits: usize,
    pub lp_calls: usize,
    pub interval_leaves: usize,
    pub lp_leaves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifyResult {
    Verified(ProofNode),
    Counterexample(Counterexample),
    ResourceLimit { splits: usize },
}

enum Explore {
    Proof(ProofNode),
    Stop(VerifyResult),
}

struct Search<'a> {
    net: &'a Network,
    query: &'a VerifyQuery,
    limits: Limits,
    start: Instant,
    stats: Stats,
}

/// Decides `query` for `net`: a proof that it is unsatisfiable, an exact
/// counterexample, or a resource-limit report.
pub fn bnb_verify(net: &Network, query: &VerifyQuery, limits: Limits) -> Result<(VerifyResult, Stats), VerifyError> {
    query.check_against(net)?;
    let mut s = Search {
        net,
        query,
        limits,
        start: Instant::now(),
        stats: Stats::default(),
    };
    let result = match s.explore(query.bounds.clone(), no_phases(net))? {
        Explore::Proof(p) => VerifyResult::Verified(p),
        Explore::Stop(r) => r,
    };
    Ok((result, s.stats))
}

impl Search<'_> {
    fn explore(&mut self, input_box: Vec<(Rational, Rational)>, phases: Phases) -> Result<Explore, VerifyError> {
        let ibp = interval_propagate_with(self.net, &input_box, &phases);
        let sys = build_leaf_system(self.net, self.query, &input_box, &ibp);
        if let Some(witness) = interval_witness(self.net, self.query, &sys) {
            self.stats.interval_leaves += 1;
            return Ok(Explore::Proof(ProofNode::Leaf {
                kind: LeafKind::Interval,
                witness,
            }));
        }
        if self.start.elapsed() > self.limits.timeout {
            return Ok(Explore::Stop(VerifyResult::ResourceLimit {
                splits: self.stats.splits,
            }));
        }
        self.stats.lp_calls += 1;
        let point = match lp_feasible(&sys)? {
            LpOutcome::Infeasible(witness) => {
                self.stats.lp_leaves += 1;
                return Ok(Explore::Proof(ProofNode::Leaf {
                    kind: LeafKind::Lp,
                    witness,
                }));
            }
            LpOutcome::Feasible(p) => p,
        };
        let x = &point[..self.net.input_dim()];
        if self.query.is_violation(self.net, x) {
            let output = self.net.eval_exact(x).map_err(|e| VerifyError::Dimension(e.to_string()))?;
            return Ok(Explore::Stop(VerifyResult::Counterexample(Counterexample {
                input: x.to_vec(),
                output,
            })));
        }

        let split = self
            .quadratic_split(x, &input_box)
            .or_else(|| widest_ambiguous(&ibp.pre, &ibp.states))
            .ok_or_else(|| {
                VerifyError::Internal("relaxation point is exact but not a counterexample".into())
            })?;
        self.stats.splits += 1;
        if self.stats.splits > self.limits.max_splits {
            return Ok(Explore::Stop(VerifyResult::ResourceLimit {
                splits: self.stats.splits,
            }));
        }
        let children: [(Vec<(Rational, Rational)>, Phases); 2] = match &split {
            Split::Relu { layer, neuron } => {
                let mut active = phases.clone();
                active[*layer][*neuron] = Some(Phase::Active);
                let mut inactive = phases;
                inactive[*layer][*neuron] = Some(Phase::Inactive);
                [(input_box.clone(), active), (input_box, inactive)]
            }
            Split::Input { var, at } => {
                let mut lower = input_box.clone();
                lower[*var].1 = at.clone();
                let mut upper = input_box;
                upper[*var].0 = at.clone();
                [(lower, phases.clone()), (upper, phases)]
            }
        };
        let [first, second] = children;
        let a = match self.explore(first.0, first.1)? {
            Explore::Proof(p) => p,
            stop => return Ok(stop),
        };
        let b = match self.explore(second.0, second.1)? {
            Explore::Proof(p) => p,
            stop => return Ok(stop),
        };
        Ok(Explore::Proof(ProofNode::Split {
            split,
            children: Box::new([a, b]),
        }))
    }

    /// Bisects the variable of the first quadratic constraint the relaxation
    /// point violates.
    fn quadratic_split(&self, x: &[Rational], input_box: &[(Rational, Rational)]) -> Option<Split> {
        let q = self.query.quadratic.iter().find(|q| !q.holds(x))?;
        let (lo, hi) = &input_box[q.var];
        if lo == hi {
            return None;
        }
        Some(Split::Input {
            var: q.var,
            at: (lo + hi) / Rational::from_integer(2.into()),
        })
    }
}

/// The leaf system of the node reached by `path` (each split with the
/// index of the branch taken: 0 for active/lower, 1 for inactive/upper).
pub fn node_system(net: &Network, query: &VerifyQuery, path: &[(Split, usize)]) -> LinearSystem {
    let mut input_box = query.bounds.clone();
    let mut phases = no_phases(net);
    for (split, side) in path {
        match split {
            Split::Relu { layer, neuron } => {
                phases[*layer][*neuron] = Some(if *side == 0 { Phase::Active } else { Phase::Inactive });
            }
            Split::Input { var, at } => {
                if *side == 0 {
                    input_box[*var].1 = at.clone();
                } else {
                    input_box[*var].0 = at.clone();
                }
            }
        }
    }
    let ibp = interval_propagate_with(net, &input_box, &phases);
    build_leaf_system(net, query, &input_box, &ibp)
}

/// The ambiguous neuron with the widest pre-activation interval; ties go to
/// the lowest (layer, neuron) index.
fn widest_ambiguous(pre: &[Vec<(Rational, Rational)>], states: &[Vec<NeuronState>]) -> Option<Split> {
    let mut best: Option<(Rational, usize, usize)> = None;
    for (l, layer) in states.iter().enumerate() {
        for (j, s) in layer.iter().enumerate() {
            if *s != NeuronState::Ambiguous {
                continue;
            }
            let w = &pre[l][j].1 - &pre[l][j].0;
            if best.as_ref().is_none_or(|(bw, _, _)| w > *bw) {
                best = Some((w, l, j));
            }
        }
    }
    best.map(|(_, layer, neuron)| Split::Relu { layer, neuron })
}
