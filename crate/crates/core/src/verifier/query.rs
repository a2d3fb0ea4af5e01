//! Reachability queries and their compilation from `∀`-properties.
//!
//! A query describes the negation of a property: a box over the network
//! inputs `x`, linear and single-square side constraints over `x`, and a
//! conjunction of linear rows over `x` and the outputs `y` that together
//! describe a violation. The property holds on the region iff the query is
//! unsatisfiable.

use super::VerifyError;
use crate::network::Network;
use crate::rational::Rational;
use crate::spec_lang::{Atom, Cmp, Formula, NormKind, Term, TypedSpec};
use num_traits::{One, Zero};

/// `x·a (< | ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub x: Vec<Rational>,
    pub strict: bool,
    pub rhs: Rational,
}

/// `x·a + square·x[var]² (< | ≤) rhs` with `square ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRow {
    pub x: Vec<Rational>,
    pub var: usize,
    pub square: Rational,
    pub strict: bool,
    pub rhs: Rational,
}

/// `x·a + y·d (< | ≤) rhs`: one conjunct of the negated property.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRow {
    pub x: Vec<Rational>,
    pub y: Vec<Rational>,
    pub strict: bool,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyQuery {
    pub network: String,
    pub outputs: usize,
    pub bounds: Vec<(Rational, Rational)>,
    pub linear: Vec<LinearRow>,
    pub quadratic: Vec<QuadRow>,
    pub output: Vec<OutputRow>,
}

fn dot(a: &[Rational], x: &[Rational]) -> Rational {
    a.iter().zip(x).fold(Rational::zero(), |acc, (c, v)| acc + c * v)
}

fn holds(lhs: &Rational, strict: bool, rhs: &Rational) -> bool {
    if strict {
        lhs < rhs
    } else {
        lhs <= rhs
    }
}

impl LinearRow {
    pub fn holds(&self, x: &[Rational]) -> bool {
        holds(&dot(&self.x, x), self.strict, &self.rhs)
    }
}

impl QuadRow {
    pub fn lhs(&self, x: &[Rational]) -> Rational {
        dot(&self.x, x) + &self.square * &x[self.var] * &x[self.var]
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        holds(&self.lhs(x), self.strict, &self.rhs)
    }
}

impl OutputRow {
    pub fn holds(&self, x: &[Rational], y: &[Rational]) -> bool {
        holds(&(dot(&self.x, x) + dot(&self.y, y)), self.strict, &self.rhs)
    }
}

impl VerifyQuery {
    pub fn inputs(&self) -> usize {
        self.bounds.len()
    }

    /// Box, linear and exact quadratic constraints.
    pub fn input_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.inputs()
            && self.bounds.iter().zip(x).all(|((lo, hi), v)| lo <= v && v <= hi)
            && self.linear.iter().all(|r| r.holds(x))
            && self.quadratic.iter().all(|r| r.holds(x))
    }

    /// Whether `x` is an exact witness of the query for `net`.
    pub fn is_violation(&self, net: &Network, x: &[Rational]) -> bool {
        if !self.input_feasible(x) {
            return false;
        }
        match net.eval_exact(x) {
            Ok(y) => self.output.iter().all(|r| r.holds(x, &y)),
            Err(_) => false,
        }
    }

    pub fn check_against(&self, net: &Network) -> Result<(), VerifyError> {
        if net.input_dim() != self.inputs() || net.output_dim() != self.outputs {
            return Err(VerifyError::Dimension(format!(
                "query is {} -> {}, network is {} -> {}",
                self.inputs(),
                self.outputs,
                net.input_dim(),
                net.output_dim()
            )));
        }
        let n = self.inputs();
        let ok = self.linear.iter().all(|r| r.x.len() == n)
            && self.quadratic.iter().all(|r| r.x.len() == n && r.var < n && !r.square.is_zero())
            && self.output.iter().all(|r| r.x.len() == n && r.y.len() == self.outputs)
            && self.bounds.iter().all(|(lo, hi)| lo <= hi);
        if !ok {
            return Err(VerifyError::Dimension("malformed query rows".into()));
        }
        Ok(())
    }
}

/// Affine expression over inputs and outputs plus at most one square term.
#[derive(Debug, Clone, PartialEq)]
struct Lin {
    c: Rational,
    x: Vec<Rational>,
    y: Vec<Rational>,
    sq: Option<(usize, Rational)>,
}

impl Lin {
    fn zero(n: usize, m: usize) -> Lin {
        Lin {
            c: Rational::zero(),
            x: vec![Rational::zero(); n],
            y: vec![Rational::zero(); m],
            sq: None,
        }
    }

    fn scale(mut self, k: &Rational) -> Lin {
        self.c *= k;
        self.x.iter_mut().for_each(|v| *v *= k);
        self.y.iter_mut().for_each(|v| *v *= k);
        if let Some((_, s)) = &mut self.sq {
            *s *= k;
        }
        self
    }

    fn add(mut self, other: Lin) -> Result<Lin, VerifyError> {
        self.c += other.c;
        self.x.iter_mut().zip(other.x).for_each(|(a, b)| *a += b);
        self.y.iter_mut().zip(other.y).for_each(|(a, b)| *a += b);
        self.sq = match (self.sq, other.sq) {
            (None, s) | (s, None) => s,
            (Some((i, a)), Some((j, b))) if i == j => Some((i, a + b)),
            _ => return Err(unsupported("at most one squared variable per constraint")),
        };
        if matches!(&self.sq, Some((_, s)) if s.is_zero()) {
            self.sq = None;
        }
        Ok(self)
    }

    fn has_outputs(&self) -> bool {
        self.y.iter().any(|v| !v.is_zero())
    }
}

fn unsupported(msg: &str) -> VerifyError {
    VerifyError::Unsupported(msg.to_string())
}

struct Ctx<'a> {
    spec: &'a TypedSpec,
    net: &'a Network,
    net_name: Option<String>,
    /// Quantified variable name for each network input.
    inputs: Vec<String>,
    outputs: usize,
}

impl Ctx<'_> {
    fn lin(&self, t: &Term) -> Result<Lin, VerifyError> {
        let n = self.inputs.len();
        Ok(match t {
            Term::Var { name, .. } => {
                let mut l = Lin::zero(n, self.outputs);
                if let Some(i) = self.inputs.iter().position(|v| v == name) {
                    l.x[i] = Rational::one();
                } else if let Some(c) = self.spec.constant(name) {
                    l.c = c.clone();
                } else {
                    return Err(VerifyError::Unsupported(format!("unbound variable {name}")));
                }
                l
            }
            Term::Const(q) => {
                let mut l = Lin::zero(n, self.outputs);
                l.c = q.clone();
                l
            }
            Term::Add(a, b) => self.lin(a)?.add(self.lin(b)?)?,
            Term::Sub(a, b) => self.lin(a)?.add(self.lin(b)?.scale(&-Rational::one()))?,
            Term::ScalarMul(k, a) => self.lin(a)?.scale(k),
            Term::Square(a) => {
                let inner = self.lin(a)?;
                if inner.sq.is_some() || inner.has_outputs() {
                    return Err(unsupported("squares are limited to a scaled input variable"));
                }
                let nz: Vec<usize> = (0..n).filter(|&i| !inner.x[i].is_zero()).collect();
                let mut l = Lin::zero(n, self.outputs);
                match (nz.as_slice(), inner.c.is_zero()) {
                    ([], _) => l.c = &inner.c * &inner.c,
                    ([i], true) => l.sq = Some((*i, &inner.x[*i] * &inner.x[*i])),
                    _ => return Err(unsupported("squares are limited to a scaled input variable")),
                }
                l
            }
            Term::NetApply {
                net, args, output, ..
            } => {
                if Some(net) != self.net_name.as_ref() {
                    return Err(VerifyError::Unsupported(format!("unexpected network {net}")));
                }
                let mut l = Lin::zero(n, self.outputs);
                if let Some(point) = self.constant_args(args)? {
                    let y = self.net.eval_exact(&point).map_err(|e| VerifyError::Dimension(e.to_string()))?;
                    l.c = y[*output].clone();
                } else {
                    l.y[*output] = Rational::one();
                }
                l
            }
            Term::NormDiff { .. } => return Err(unsupported("norms must form a whole side of a comparison")),
        })
    }

    /// `Some(point)` when all arguments are closed; `None` when they are the
    /// query inputs in order.
    fn constant_args(&self, args: &[Term]) -> Result<Option<Vec<Rational>>, VerifyError> {
        let lins = args.iter().map(|a| self.lin(a)).collect::<Result<Vec<_>, _>>()?;
        let closed = |l: &Lin| l.sq.is_none() && !l.has_outputs() && l.x.iter().all(Zero::is_zero);
        if lins.iter().all(closed) {
            return Ok(Some(lins.into_iter().map(|l| l.c).collect()));
        }
        let is_input = args
            .iter()
            .enumerate()
            .all(|(i, a)| matches!(a, Term::Var { name, .. } if self.inputs.get(i) == Some(name)));
        if is_input {
            Ok(None)
        } else {
            Err(unsupported(
                "network arguments must be the quantified variables in input order, or constants",
            ))
        }
    }

    /// `lhs cmp rhs` as `row (≤|<) rhs'`.
    fn row(&self, a: &Atom) -> Result<(Lin, bool), VerifyError> {
        let (l, r) = (self.lin(&a.lhs)?, self.lin(&a.rhs)?);
        let diff = match a.cmp {
            Cmp::Le | Cmp::Lt => l.add(r.scale(&-Rational::one()))?,
            Cmp::Ge | Cmp::Gt => r.add(l.scale(&-Rational::one()))?,
        };
        Ok((diff, a.cmp.is_strict()))
    }
}

/// Negation normal form over atoms.
#[derive(Debug, Clone)]
enum Nnf {
    Atom(Atom),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

fn nnf(f: &Formula, negate: bool) -> Result<Nnf, VerifyError> {
    Ok(match (f, negate) {
        (Formula::Atom(a), false) => expand_norm(a.clone())?,
        (Formula::Atom(a), true) => expand_norm(Atom {
            cmp: a.cmp.negate(),
            ..a.clone()
        })?,
        (Formula::Not(a), n) => nnf(a, !n)?,
        (Formula::And(a, b), false) | (Formula::Or(a, b), true) => Nnf::And(vec![nnf(a, negate)?, nnf(b, negate)?]),
        (Formula::Or(a, b), false) | (Formula::And(a, b), true) => Nnf::Or(vec![nnf(a, negate)?, nnf(b, negate)?]),
        (Formula::Implies(a, b), false) => Nnf::Or(vec![nnf(a, true)?, nnf(b, false)?]),
        (Formula::Implies(a, b), true) => Nnf::And(vec![nnf(a, false)?, nnf(b, true)?]),
        (Formula::Forall(_) | Formula::Exists(_), _) => {
            return Err(unsupported("quantifiers below the outer universal block"))
        }
    })
}

/// Rewrites `‖l − r‖ cmp t` into linear atoms.
fn expand_norm(a: Atom) -> Result<Nnf, VerifyError> {
    let (norm, left, right, cmp, bound) = match (&a.lhs, &a.rhs) {
        (Term::NormDiff { norm, left, right }, t) => (*norm, left, right, a.cmp, t),
        (t, Term::NormDiff { norm, left, right }) => (*norm, left, right, flip(a.cmp), t),
        _ => return Ok(Nnf::Atom(a)),
    };
    let mut contains_norm = false;
    bound.visit(&mut |t| contains_norm |= matches!(t, Term::NormDiff { .. }));
    if contains_norm {
        return Err(unsupported("comparison between two norms"));
    }
    let diffs: Vec<Term> = left
        .iter()
        .zip(right)
        .map(|(l, r)| Term::Sub(Box::new(l.clone()), Box::new(r.clone())))
        .collect();
    let signed = |d: &Term, neg: bool| {
        if neg {
            Term::ScalarMul(-Rational::one(), Box::new(d.clone()))
        } else {
            d.clone()
        }
    };
    let mut forms: Vec<Term> = Vec::new();
    match norm {
        NormKind::Linf => {
            for d in &diffs {
                forms.push(signed(d, false));
                forms.push(signed(d, true));
            }
        }
        NormKind::L1 => {
            if diffs.len() > 10 {
                return Err(unsupported("l1 norm over more than 10 coordinates"));
            }
            for mask in 0u32..(1 << diffs.len()) {
                let mut it = diffs.iter().enumerate().map(|(i, d)| signed(d, mask >> i & 1 == 1));
                let first = it.next().unwrap_or(Term::Const(Rational::zero()));
                forms.push(it.fold(first, |acc, t| Term::Add(Box::new(acc), Box::new(t))));
            }
        }
    }
    let atoms = forms
        .into_iter()
        .map(|t| Nnf::Atom(Atom { cmp, lhs: t, rhs: bound.clone(), span: a.span }))
        .collect();
    Ok(match cmp {
        Cmp::Le | Cmp::Lt => Nnf::And(atoms),
        Cmp::Ge | Cmp::Gt => Nnf::Or(atoms),
    })
}

fn flip(c: Cmp) -> Cmp {
    match c {
        Cmp::Le => Cmp::Ge,
        Cmp::Lt => Cmp::Gt,
        Cmp::Ge => Cmp::Le,
        Cmp::Gt => Cmp::Lt,
    }
}

const MAX_CLAUSES: usize = 256;

fn dnf(f: &Nnf) -> Result<Vec<Vec<Atom>>, VerifyError> {
    Ok(match f {
        Nnf::Atom(a) => vec![vec![a.clone()]],
        Nnf::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                out.extend(dnf(p)?);
            }
            out
        }
        Nnf::And(parts) => {
            let mut acc: Vec<Vec<Atom>> = vec![Vec::new()];
            for p in parts {
                let d = dnf(p)?;
                let mut next = Vec::with_capacity(acc.len() * d.len());
                for a in &acc {
                    for b in &d {
                        next.push(a.iter().chain(b).cloned().collect());
                    }
                }
                if next.len() > MAX_CLAUSES {
                    return Err(unsupported("negated property expands to too many cases"));
                }
                acc = next;
            }
            acc
        }
    })
}

/// Compiles the named `∀`-property into queries, one per disjunct of its
/// negated body. The property holds iff every query is unsatisfiable.
pub fn compile_property_queries(spec: &TypedSpec, name: &str, net: &Network) -> Result<Vec<VerifyQuery>, VerifyError> {
    let prop = spec
        .property(name)
        .ok_or_else(|| VerifyError::Unsupported(format!("unknown property {name}")))?;
    compile_queries(spec, &prop.formula, net)
}

pub fn compile_queries(spec: &TypedSpec, formula: &Formula, net: &Network) -> Result<Vec<VerifyQuery>, VerifyError> {
    let mut vars = Vec::new();
    let mut bounds = Vec::new();
    let mut sides = Vec::new();
    let mut body = formula;
    while let Formula::Forall(q) = body {
        vars.extend(q.vars.iter().cloned());
        bounds.extend(q.domain.bounds.iter().cloned());
        sides.extend(q.domain.side_constraints.iter().cloned());
        body = &q.body;
    }
    if vars.is_empty() {
        return Err(unsupported("property must be universally quantified"));
    }

    let mut net_name: Option<String> = None;
    let mut input_order: Option<Vec<String>> = None;
    let mut conflict = false;
    body.visit_atoms(&mut |a| {
        for t in [&a.lhs, &a.rhs] {
            t.visit(&mut |s| {
                if let Term::NetApply { net, args, .. } = s {
                    if net_name.get_or_insert_with(|| net.clone()) != net {
                        conflict = true;
                    }
                    let names: Option<Vec<String>> = args
                        .iter()
                        .map(|a| match a {
                            Term::Var { name, .. } if vars.contains(name) => Some(name.clone()),
                            _ => None,
                        })
                        .collect();
                    if let Some(names) = names {
                        if input_order.get_or_insert_with(|| names.clone()) != &names {
                            conflict = true;
                        }
                    }
                }
            });
        }
    });
    if conflict {
        return Err(unsupported(
            "all network applications must use one network with one argument order",
        ));
    }
    let order = input_order.unwrap_or_else(|| vars.clone());
    let mut sorted_order = order.clone();
    sorted_order.sort();
    let mut sorted_vars = vars.clone();
    sorted_vars.sort();
    sorted_order.dedup();
    if sorted_order != sorted_vars || order.len() != vars.len() {
        return Err(unsupported("network arguments must be exactly the quantified variables"));
    }
    let decl_name = net_name.clone().unwrap_or_else(|| "f".into());
    if let Some(decl) = spec.network(&decl_name) {
        if decl.input_dim != net.input_dim() || decl.output_dim != net.output_dim() {
            return Err(VerifyError::Dimension(format!(
                "{decl_name} is declared {} -> {} but the network is {} -> {}",
                decl.input_dim,
                decl.output_dim,
                net.input_dim(),
                net.output_dim()
            )));
        }
    }
    if order.len() != net.input_dim() {
        return Err(VerifyError::Dimension(format!(
            "{} quantified variables for a network with {} inputs",
            order.len(),
            net.input_dim()
        )));
    }

    let ctx = Ctx {
        spec,
        net,
        net_name: net_name.clone(),
        inputs: order.clone(),
        outputs: net.output_dim(),
    };
    let perm: Vec<usize> = order.iter().map(|v| vars.iter().position(|w| w == v).unwrap()).collect();
    let box_bounds: Vec<(Rational, Rational)> = perm.iter().map(|&i| bounds[i].clone()).collect();

    let mut linear = Vec::new();
    let mut quadratic = Vec::new();
    for s in &sides {
        let (l, strict) = ctx.row(s)?;
        push_input_row(l, strict, &mut linear, &mut quadratic)?;
    }

    let clauses = dnf(&nnf(body, true)?)?;
    let mut queries = Vec::with_capacity(clauses.len());
    for clause in clauses {
        let mut q = VerifyQuery {
            network: decl_name.clone(),
            outputs: net.output_dim(),
            bounds: box_bounds.clone(),
            linear: linear.clone(),
            quadratic: quadratic.clone(),
            output: Vec::new(),
        };
        for a in &clause {
            let (l, strict) = ctx.row(a)?;
            if l.sq.is_some() {
                if l.has_outputs() {
                    return Err(unsupported("squares cannot be combined with network outputs"));
                }
                push_input_row(l, strict, &mut q.linear, &mut q.quadratic)?;
            } else {
                q.output.push(OutputRow {
                    x: l.x,
                    y: l.y,
                    strict,
                    rhs: -l.c,
                });
            }
        }
        queries.push(q);
    }
    Ok(queries)
}

fn push_input_row(
    l: Lin,
    strict: bool,
    linear: &mut Vec<LinearRow>,
    quadratic: &mut Vec<QuadRow>,
) -> Result<(), VerifyError> {
    if l.has_outputs() {
        return Err(unsupported("side constraints cannot mention network outputs"));
    }
    match l.sq {
        None => linear.push(LinearRow {
            x: l.x,
            strict,
            rhs: -l.c,
        }),
        Some((var, square)) => quadratic.push(QuadRow {
            x: l.x,
            var,
            square,
            strict,
            rhs: -l.c,
        }),
    }
    Ok(())
}

/// Negated-property row as text, for reports.
pub fn describe_output_row(r: &OutputRow) -> String {
    let mut terms = Vec::new();
    for (i, c) in r.x.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
        terms.push(format!("{} x{i}", crate::rational::format_rational(c)));
    }
    for (k, c) in r.y.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
        terms.push(format!("{} y{k}", crate::rational::format_rational(c)));
    }
    if terms.is_empty() {
        terms.push("0".into());
    }
    format!(
        "{} {} {}",
        terms.join(" + "),
        if r.strict { "<" } else { "<=" },
        crate::rational::format_rational(&r.rhs)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::rational::{int, ratio};
    use crate::spec_lang::{parse_spec, typecheck};

    fn tn_id() -> Network {
        Network::new(vec![Layer::new(vec![vec![int(1)]], vec![int(0)], Activation::Identity)]).unwrap()
    }

    #[test]
    fn simple_bound_query() {
        let spec = typecheck(parse_spec("network f : 1 -> 1\nprop p: forall x in [-1,1] . f[x]!0 <= 3/2").unwrap())
            .unwrap();
        let qs = compile_property_queries(&spec, "p", &tn_id()).unwrap();
        assert_eq!(qs.len(), 1);
        let q = &qs[0];
        assert_eq!(q.bounds, vec![(int(-1), int(1))]);
        // Negation: f > 3/2, i.e. -y < -3/2.
        assert_eq!(
            q.output,
            vec![OutputRow {
                x: vec![int(0)],
                y: vec![int(-1)],
                strict: true,
                rhs: ratio(-3, 2)
            }]
        );
    }

    #[test]
    fn robustness_splits_into_two_cases() {
        let spec = typecheck(parse_spec("network f : 1 -> 1\nprop r: robust f at [0] eps 1/10 delta 1/10").unwrap())
            .unwrap();
        let qs = compile_property_queries(&spec, "r", &tn_id()).unwrap();
        assert_eq!(qs.len(), 2);
        assert!(qs.iter().all(|q| q.output.len() == 1 && q.output[0].strict));
    }

    #[test]
    fn car_precondition_is_quadratic() {
        let spec = typecheck(
            parse_spec(
                "network f : 2 -> 1\nconst B = 1\nprop xi: forall v in [-1,1], p in [-1,1] where 5*p + 5 > (5*v)^2/(2*B) . f[v,p]!0 <= -1/5",
            )
            .unwrap(),
        )
        .unwrap();
        let net = Network::new(vec![Layer::new(vec![vec![int(1), int(1)]], vec![int(0)], Activation::Identity)])
            .unwrap();
        let qs = compile_property_queries(&spec, "xi", &net).unwrap();
        assert_eq!(qs[0].quadratic.len(), 1);
        let row = &qs[0].quadratic[0];
        // (25/2) v^2 - 5 p < 5
        assert_eq!((row.var, row.square.clone(), row.strict), (0, ratio(25, 2), true));
        assert_eq!(row.x, vec![int(0), int(-5)]);
        assert_eq!(row.rhs, int(5));
    }

    #[test]
    fn argument_order_is_respected() {
        let spec = typecheck(
            parse_spec("network f : 2 -> 1\nprop p: forall a in [0,1], b in [2,3] . f[b,a]!0 <= 0").unwrap(),
        )
        .unwrap();
        let net = Network::new(vec![Layer::new(vec![vec![int(1), int(1)]], vec![int(0)], Activation::Identity)])
            .unwrap();
        let qs = compile_property_queries(&spec, "p", &net).unwrap();
        assert_eq!(qs[0].bounds, vec![(int(2), int(3)), (int(0), int(1))]);
    }
}
