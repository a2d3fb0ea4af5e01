//! Loss evaluation, reverse-mode gradients and the finite-difference check.

use super::arith::{Arith, ExactArith, FloatArith, Tape};
use super::{draw_samples, Logic, LogicError, LossTerm, Node, QuantSemantics, Samples};
use crate::network::{Activation, Network};
use crate::rational::Rational;
use crate::spec_lang::{Cmp, Formula, Term};
use num_traits::{One, Zero};

struct Eval<'a, A: Arith> {
    ctx: A,
    term: &'a LossTerm,
    samples: &'a Samples,
    shape: &'a [(usize, usize, Activation)],
    env: Vec<(&'a str, &'a Rational)>,
}

impl<'a, A: Arith> Eval<'a, A> {
    fn zero(&mut self) -> A::V {
        self.ctx.konst(&Rational::zero())
    }

    fn one(&mut self) -> A::V {
        self.ctx.konst(&Rational::one())
    }

    fn run(&mut self) -> Result<A::V, LogicError> {
        let root = &self.term.root;
        match self.node(root)? {
            Some(v) => Ok(v),
            None if self.term.config.logic == Logic::LawvereLoss => Ok(self.zero()),
            None => Ok(self.one()),
        }
    }

    /// `None` marks a vacuously true value (a filtered-out Lawvere implication).
    fn node(&mut self, n: &'a Node) -> Result<Option<A::V>, LogicError> {
        let logic = self.term.config.logic;
        Ok(match n {
            Node::Atom(a) => {
                let l = self.term(&a.lhs)?;
                let r = self.term(&a.rhs)?;
                let d = match a.cmp {
                    Cmp::Le | Cmp::Lt => self.ctx.sub(&l, &r),
                    Cmp::Ge | Cmp::Gt => self.ctx.sub(&r, &l),
                };
                let zero = self.zero();
                let violation = self.ctx.max(&zero, &d);
                Some(match logic {
                    Logic::LawvereLoss => violation,
                    _ if self.term.config.sharp_atoms => {
                        let holds = if a.cmp.is_strict() {
                            let neg = self.ctx.min(&d, &zero);
                            !self.ctx.is_zero(&neg)
                        } else {
                            self.ctx.is_zero(&violation)
                        };
                        self.ctx.branch(holds);
                        if holds {
                            self.one()
                        } else {
                            self.zero()
                        }
                    }
                    _ => {
                        let inv_tau = Rational::one() / &self.term.config.tau;
                        let scaled = self.ctx.scale(&violation, &inv_tau);
                        let one = self.one();
                        let t = self.ctx.sub(&one, &scaled);
                        self.ctx.max(&zero, &t)
                    }
                })
            }
            Node::And(a, b) => {
                let (x, y) = (self.node(a)?, self.node(b)?);
                match (x, y) {
                    (None, v) | (v, None) => v,
                    (Some(x), Some(y)) => Some(conj_with(&mut self.ctx, logic, self.term.config.lawvere_product, &x, &y)),
                }
            }
            Node::Or(a, b) => {
                let (x, y) = (self.node(a)?, self.node(b)?);
                match (x, y) {
                    (None, _) | (_, None) => Some(self.zero()),
                    (Some(x), Some(y)) => Some(disj_with(&mut self.ctx, logic, &x, &y)),
                }
            }
            Node::Not(a) => match self.node(a)? {
                Some(v) => Some(neg_with(&mut self.ctx, &v)),
                None => None,
            },
            Node::Guard { cond, body } => {
                let holds = match self.node(cond)? {
                    Some(c) => self.ctx.is_zero(&c),
                    None => true,
                };
                self.ctx.branch(holds);
                if holds {
                    self.node(body)?
                } else {
                    None
                }
            }
            Node::Quant { id, forall, vars, body } => {
                let points = self
                    .samples
                    .sets
                    .get(*id)
                    .ok_or_else(|| LogicError::Dimension(format!("no samples for quantifier {id}")))?;
                let mut vals = Vec::with_capacity(points.len());
                for pt in points {
                    let depth = self.env.len();
                    self.env.extend(vars.iter().map(String::as_str).zip(pt.iter()));
                    let v = self.node(body);
                    self.env.truncate(depth);
                    match v? {
                        Some(v) => vals.push(v),
                        // A vacuously true instance witnesses an existential;
                        // a universal simply skips it.
                        None if !*forall => {
                            return Ok(Some(if logic == Logic::LawvereLoss { self.zero() } else { self.one() }));
                        }
                        None => {}
                    }
                }
                Some(self.aggregate(&vals, *forall)?)
            }
            Node::Mse { data } => {
                let mut total = self.zero();
                for (x, t) in data {
                    let xs: Vec<A::V> = x.iter().map(|q| self.ctx.konst(q)).collect();
                    let out = self.network(&xs);
                    for (o, target) in out.iter().zip(t) {
                        let tv = self.ctx.konst(target);
                        let e = self.ctx.sub(o, &tv);
                        let sq = self.ctx.mul(&e, &e);
                        total = self.ctx.add(&total, &sq);
                    }
                }
                let inv_n = Rational::one() / Rational::from_integer(data.len().into());
                Some(self.ctx.scale(&total, &inv_n))
            }
        })
    }

    fn aggregate(&mut self, vals: &[A::V], forall: bool) -> Result<A::V, LogicError> {
        let logic = self.term.config.logic;
        if vals.is_empty() {
            return Ok(match (logic, forall) {
                (Logic::LawvereLoss, _) => self.zero(),
                (_, true) => self.one(),
                (_, false) => self.zero(),
            });
        }
        let lawvere = logic == Logic::LawvereLoss;
        match self.term.config.quantifier {
            QuantSemantics::MinMax => {
                let mut acc = vals[0].clone();
                for v in &vals[1..] {
                    acc = match (lawvere, forall) {
                        (false, true) | (true, false) => self.ctx.min(&acc, v),
                        (false, false) => self.ctx.max(&acc, v),
                        (true, true) => self.ctx.add(&acc, v),
                    };
                }
                Ok(acc)
            }
            QuantSemantics::PMean(p) => {
                let p = p.abs();
                // Universal quantifiers lean towards the worst value: the
                // minimum truth, or the maximum loss.
                let exponent = if forall == lawvere { p } else { -p };
                self.ctx.power_mean(vals, exponent)
            }
        }
    }

    fn term(&mut self, t: &Term) -> Result<A::V, LogicError> {
        Ok(match t {
            Term::Var { name, .. } => {
                if let Some((_, v)) = self.env.iter().rev().find(|(n, _)| n == name) {
                    let v: &Rational = v;
                    self.ctx.konst(v)
                } else if let Some(c) = self.term.constants.get(name) {
                    self.ctx.konst(c)
                } else {
                    return Err(LogicError::Dimension(format!("unbound variable {name}")));
                }
            }
            Term::Const(q) => self.ctx.konst(q),
            Term::Add(a, b) => {
                let (x, y) = (self.term(a)?, self.term(b)?);
                self.ctx.add(&x, &y)
            }
            Term::Sub(a, b) => {
                let (x, y) = (self.term(a)?, self.term(b)?);
                self.ctx.sub(&x, &y)
            }
            Term::ScalarMul(c, a) => {
                let x = self.term(a)?;
                self.ctx.scale(&x, c)
            }
            Term::Square(a) => {
                let x = self.term(a)?;
                self.ctx.mul(&x, &x)
            }
            Term::NetApply { args, output, .. } => {
                let xs = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                let mut out = self.network(&xs);
                if *output >= out.len() {
                    return Err(LogicError::Dimension(format!("output index {output} out of range")));
                }
                out.swap_remove(*output)
            }
            Term::NormDiff { norm, left, right } => {
                let mut acc: Option<A::V> = None;
                for (l, r) in left.iter().zip(right) {
                    let (x, y) = (self.term(l)?, self.term(r)?);
                    let d = self.ctx.sub(&x, &y);
                    let nd = self.ctx.scale(&d, &-Rational::one());
                    let abs = self.ctx.max(&d, &nd);
                    acc = Some(match acc {
                        None => abs,
                        Some(a) => match norm {
                            crate::spec_lang::NormKind::Linf => self.ctx.max(&a, &abs),
                            crate::spec_lang::NormKind::L1 => self.ctx.add(&a, &abs),
                        },
                    });
                }
                match acc {
                    Some(a) => a,
                    None => self.zero(),
                }
            }
        })
    }

    fn network(&mut self, input: &[A::V]) -> Vec<A::V> {
        let mut x = input.to_vec();
        let mut off = 0;
        for &(rows, cols, act) in self.shape {
            let mut next = Vec::with_capacity(rows);
            for r in 0..rows {
                let mut z = self.ctx.param(off + rows * cols + r);
                for (c, xc) in x.iter().enumerate() {
                    let w = self.ctx.param(off + r * cols + c);
                    let wx = self.ctx.mul(&w, xc);
                    z = self.ctx.add(&z, &wx);
                }
                if act == Activation::Relu {
                    let zero = self.zero();
                    z = self.ctx.max(&zero, &z);
                }
                next.push(z);
            }
            off += rows * (cols + 1);
            x = next;
        }
        x
    }
}

pub(crate) fn conj_with<A: Arith>(ctx: &mut A, logic: Logic, lawvere_product: bool, x: &A::V, y: &A::V) -> A::V {
    match logic {
        Logic::Godel => ctx.min(x, y),
        Logic::Lukasiewicz => {
            let s = ctx.add(x, y);
            let one = ctx.konst(&Rational::one());
            let t = ctx.sub(&s, &one);
            let zero = ctx.konst(&Rational::zero());
            ctx.max(&zero, &t)
        }
        Logic::LawvereLoss if lawvere_product => ctx.mul(x, y),
        Logic::LawvereLoss => ctx.add(x, y),
    }
}

pub(crate) fn disj_with<A: Arith>(ctx: &mut A, logic: Logic, x: &A::V, y: &A::V) -> A::V {
    match logic {
        Logic::Godel => ctx.max(x, y),
        Logic::Lukasiewicz => {
            let s = ctx.add(x, y);
            let one = ctx.konst(&Rational::one());
            ctx.min(&one, &s)
        }
        Logic::LawvereLoss => ctx.min(x, y),
    }
}

pub(crate) fn neg_with<A: Arith>(ctx: &mut A, x: &A::V) -> A::V {
    let one = ctx.konst(&Rational::one());
    ctx.sub(&one, x)
}

/// Conjunction of two truth values (losses under [`Logic::LawvereLoss`],
/// combined additively), exactly as used during loss evaluation.
pub fn conj(logic: Logic, x: &Rational, y: &Rational) -> Rational {
    conj_with(&mut ExactArith::new(&[]), logic, false, x, y)
}

/// Disjunction of two truth values, exactly as used during loss evaluation.
pub fn disj(logic: Logic, x: &Rational, y: &Rational) -> Rational {
    disj_with(&mut ExactArith::new(&[]), logic, x, y)
}

/// Negation `1 − x` of a `[0,1]` truth value.
pub fn neg(x: &Rational) -> Rational {
    neg_with(&mut ExactArith::new(&[]), x)
}

/// Power mean `(mean vᵢ^p)^(1/p)` of non-negative values, as used by the
/// p-mean quantifier semantics.
pub fn power_mean(vals: &[f64], p: f64) -> f64 {
    super::arith::power_mean_f64(vals, p).0
}

fn run<A: Arith>(
    ctx: A,
    term: &LossTerm,
    shape: &[(usize, usize, Activation)],
    samples: &Samples,
) -> Result<(A::V, A), LogicError> {
    let mut ev = Eval {
        ctx,
        term,
        samples,
        shape,
        env: Vec::new(),
    };
    let v = ev.run()?;
    Ok((v, ev.ctx))
}

/// Float loss value.
pub fn eval_loss(term: &LossTerm, net: &Network, samples: &Samples) -> Result<f64, LogicError> {
    term.check_network(net)?;
    let params = net.params_f64();
    Ok(run(FloatArith::new(&params), term, &net.shape(), samples)?.0)
}

/// Loss value in exact rational arithmetic (power means restricted to `p = ±1`).
pub fn eval_loss_exact(term: &LossTerm, net: &Network, samples: &Samples) -> Result<Rational, LogicError> {
    term.check_network(net)?;
    let params = net.params();
    Ok(run(ExactArith::new(&params), term, &net.shape(), samples)?.0)
}

/// Subgradient of the loss with respect to every network parameter
/// (canonical parameter order).
pub fn grad_loss(term: &LossTerm, net: &Network, samples: &Samples) -> Result<Vec<f64>, LogicError> {
    Ok(value_and_grad(term, net, samples)?.1)
}

pub fn value_and_grad(term: &LossTerm, net: &Network, samples: &Samples) -> Result<(f64, Vec<f64>), LogicError> {
    term.check_network(net)?;
    value_and_grad_params(term, &net.shape(), &net.params_f64(), samples)
}

/// Like [`value_and_grad`] over a raw parameter vector.
pub fn value_and_grad_params(
    term: &LossTerm,
    shape: &[(usize, usize, Activation)],
    params: &[f64],
    samples: &Samples,
) -> Result<(f64, Vec<f64>), LogicError> {
    let (node, tape) = run(Tape::new(params), term, shape, samples)?;
    Ok((tape.value(node), tape.gradient(node)))
}

fn value_and_signature(
    term: &LossTerm,
    shape: &[(usize, usize, Activation)],
    params: &[f64],
    samples: &Samples,
) -> Result<(f64, Vec<bool>), LogicError> {
    let (v, ctx) = run(FloatArith::new(params), term, shape, samples)?;
    Ok((v, ctx.signature))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameters compared against finite differences.
    pub compared: usize,
    /// Parameters whose ±h perturbation crosses a kink.
    pub excluded: usize,
}

/// Compares [`grad_loss`] with central differences of step `h`. Relative
/// error is `|a − b| / max(|a|, |b|, 1e−8)`.
pub fn grad_check(term: &LossTerm, net: &Network, samples: &Samples, h: f64) -> Result<GradCheckReport, LogicError> {
    if h.is_nan() || h <= 0.0 {
        return Err(LogicError::InvalidConfig("finite-difference step must be positive".into()));
    }
    term.check_network(net)?;
    let shape = net.shape();
    let params = net.params_f64();
    let (_, grad) = value_and_grad_params(term, &shape, &params, samples)?;
    let (_, base_sig) = value_and_signature(term, &shape, &params, samples)?;
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        compared: 0,
        excluded: 0,
    };
    let mut theta = params.clone();
    for j in 0..params.len() {
        theta[j] = params[j] + h;
        let (up, up_sig) = value_and_signature(term, &shape, &theta, samples)?;
        theta[j] = params[j] - h;
        let (down, down_sig) = value_and_signature(term, &shape, &theta, samples)?;
        theta[j] = params[j];
        if up_sig != base_sig || down_sig != base_sig {
            report.excluded += 1;
            continue;
        }
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - grad[j]).abs() / fd.abs().max(grad[j].abs()).max(1e-8);
        report.max_rel_err = report.max_rel_err.max(rel);
        report.compared += 1;
    }
    Ok(report)
}

/// Boolean semantics of the term's source formula with quantifiers ranging
/// over the drawn samples, in exact arithmetic. With `closed_atoms`, strict
/// comparisons are read as their non-strict closure.
pub fn holds_on_samples(
    term: &LossTerm,
    net: &Network,
    samples: &Samples,
    closed_atoms: bool,
) -> Result<bool, LogicError> {
    term.check_network(net)?;
    let formula = term
        .source
        .as_ref()
        .ok_or_else(|| LogicError::Domain("loss term has no source formula".into()))?;
    let mut env: Vec<(String, Rational)> = Vec::new();
    truth(formula, 0, term, net, samples, closed_atoms, &mut env)
}

/// Fraction data for a single-quantifier property: of `n` fresh samples of
/// its domain (drawn with `seed`), how many satisfy the body exactly.
/// Returns `(satisfied, n)`.
pub fn satisfaction_count(term: &LossTerm, net: &Network, n: usize, seed: u64) -> Result<(usize, usize), LogicError> {
    if term.quantifiers.len() != 1 {
        return Err(LogicError::Domain(
            "satisfaction sampling needs a property with exactly one quantifier".into(),
        ));
    }
    let mut sampler = term.clone();
    sampler.config.samples = n;
    let points = draw_samples(&sampler, seed)?.sets.remove(0);
    let mut ok = 0;
    for p in points {
        let one = Samples { sets: vec![vec![p]] };
        if holds_on_samples(term, net, &one, false)? {
            ok += 1;
        }
    }
    Ok((ok, n))
}

fn quantifier_count(f: &Formula) -> usize {
    match f {
        Formula::Atom(_) => 0,
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => quantifier_count(a) + quantifier_count(b),
        Formula::Not(a) => quantifier_count(a),
        Formula::Forall(q) | Formula::Exists(q) => 1 + quantifier_count(&q.body),
    }
}

fn truth(
    f: &Formula,
    base: usize,
    term: &LossTerm,
    net: &Network,
    samples: &Samples,
    closed: bool,
    env: &mut Vec<(String, Rational)>,
) -> Result<bool, LogicError> {
    Ok(match f {
        Formula::Atom(a) => {
            let lookup = |name: &str| {
                env.iter()
                    .rev()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v.clone())
                    .or_else(|| term.constants.get(name).cloned())
            };
            let mut eval_net = |_: &str, xs: &[Rational]| net.eval_exact(xs).ok();
            let l = a.lhs.eval_exact(&lookup, &mut eval_net);
            let r = a.rhs.eval_exact(&lookup, &mut eval_net);
            let (Some(l), Some(r)) = (l, r) else {
                return Err(LogicError::Dimension("atom could not be evaluated".into()));
            };
            let cmp = match (closed, a.cmp) {
                (true, Cmp::Lt) => Cmp::Le,
                (true, Cmp::Gt) => Cmp::Ge,
                (_, c) => c,
            };
            cmp.holds(&l, &r)
        }
        Formula::And(a, b) => {
            let x = truth(a, base, term, net, samples, closed, env)?;
            let y = truth(b, base + quantifier_count(a), term, net, samples, closed, env)?;
            x && y
        }
        Formula::Or(a, b) => {
            let x = truth(a, base, term, net, samples, closed, env)?;
            let y = truth(b, base + quantifier_count(a), term, net, samples, closed, env)?;
            x || y
        }
        Formula::Implies(a, b) => {
            let x = truth(a, base, term, net, samples, closed, env)?;
            let y = truth(b, base + quantifier_count(a), term, net, samples, closed, env)?;
            !x || y
        }
        Formula::Not(a) => !truth(a, base, term, net, samples, closed, env)?,
        Formula::Forall(q) | Formula::Exists(q) => {
            let forall = matches!(f, Formula::Forall(_));
            let points = samples
                .sets
                .get(base)
                .ok_or_else(|| LogicError::Dimension(format!("no samples for quantifier {base}")))?;
            let mut result = forall;
            for pt in points {
                let depth = env.len();
                env.extend(q.vars.iter().cloned().zip(pt.iter().cloned()));
                let v = truth(&q.body, base + 1, term, net, samples, closed, env);
                env.truncate(depth);
                if v? != forall {
                    result = !forall;
                    break;
                }
            }
            result
        }
    })
}
