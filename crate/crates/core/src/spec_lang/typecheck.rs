use super::ast::*;
use crate::rational::Rational;
use std::collections::{HashMap, HashSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeError {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for TypeError {}

/// A spec that passed [`typecheck`], with its resolved symbol table.
#[derive(Debug, Clone)]
pub struct TypedSpec {
    pub spec: PropertySpec,
    networks: HashMap<String, NetworkDecl>,
    constants: HashMap<String, Rational>,
}

impl TypedSpec {
    pub fn network(&self, name: &str) -> Option<&NetworkDecl> {
        self.networks.get(name)
    }

    pub fn constant(&self, name: &str) -> Option<&Rational> {
        self.constants.get(name)
    }

    pub fn constants(&self) -> &HashMap<String, Rational> {
        &self.constants
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.spec.property(name)
    }
}

/// Checks arities, closedness, quantifier boxes and side-constraint shape.
/// Every violation is reported.
pub fn typecheck(spec: PropertySpec) -> Result<TypedSpec, Vec<TypeError>> {
    let mut errors = Vec::new();
    let mut networks = HashMap::new();
    for n in &spec.networks {
        if networks.insert(n.name.clone(), n.clone()).is_some() {
            errors.push(err(n.span, format!("duplicate network {}", n.name)));
        }
    }
    let mut constants = HashMap::new();
    for c in &spec.constants {
        if constants.insert(c.name.clone(), c.value.clone()).is_some() {
            errors.push(err(c.span, format!("duplicate constant {}", c.name)));
        }
    }
    let mut seen = HashSet::new();
    for p in &spec.properties {
        if !seen.insert(p.name.as_str()) {
            errors.push(err(p.span, format!("duplicate property {}", p.name)));
        }
    }

    let checker = Checker {
        networks: &networks,
        constants: &constants,
    };
    for p in &spec.properties {
        checker.formula(&p.formula, &mut Vec::new(), &mut errors);
    }

    if errors.is_empty() {
        Ok(TypedSpec {
            spec,
            networks,
            constants,
        })
    } else {
        Err(errors)
    }
}

fn err(span: Span, message: String) -> TypeError {
    TypeError { message, span }
}

struct Checker<'a> {
    networks: &'a HashMap<String, NetworkDecl>,
    constants: &'a HashMap<String, Rational>,
}

impl Checker<'_> {
    fn formula(&self, f: &Formula, scope: &mut Vec<String>, errors: &mut Vec<TypeError>) {
        match f {
            Formula::Atom(a) => self.atom(a, scope, errors),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                self.formula(a, scope, errors);
                self.formula(b, scope, errors);
            }
            Formula::Not(a) => self.formula(a, scope, errors),
            Formula::Forall(q) | Formula::Exists(q) => self.quantifier(q, scope, errors),
        }
    }

    fn quantifier(&self, q: &Quantifier, scope: &mut Vec<String>, errors: &mut Vec<TypeError>) {
        let mut local = HashSet::new();
        for v in &q.vars {
            if !local.insert(v.as_str()) {
                errors.push(err(q.span, format!("variable {v} bound twice by one quantifier")));
            }
        }
        for (v, (lo, hi)) in q.vars.iter().zip(&q.domain.bounds) {
            if lo > hi {
                errors.push(err(
                    q.span,
                    format!(
                        "empty interval [{}, {}] for {v}",
                        crate::rational::format_rational(lo),
                        crate::rational::format_rational(hi)
                    ),
                ));
            }
        }
        for side in &q.domain.side_constraints {
            self.side_constraint(side, &q.vars, errors);
        }
        let depth = scope.len();
        scope.extend(q.vars.iter().cloned());
        self.formula(&q.body, scope, errors);
        scope.truncate(depth);
    }

    fn side_constraint(&self, a: &Atom, vars: &[String], errors: &mut Vec<TypeError>) {
        for t in [&a.lhs, &a.rhs] {
            t.visit(&mut |sub| match sub {
                Term::Var { name, span } => {
                    if !vars.contains(name) && !self.constants.contains_key(name) {
                        errors.push(err(
                            *span,
                            format!("side constraint references {name}, which is not bound by this quantifier"),
                        ));
                    }
                }
                Term::NetApply { span, .. } => errors.push(err(
                    *span,
                    "side constraints must be linear or a single square; network application not allowed".into(),
                )),
                Term::NormDiff { .. } => errors.push(err(
                    a.span,
                    "side constraints must be linear or a single square; norms not allowed".into(),
                )),
                Term::Square(inner) => {
                    let mut nested = false;
                    inner.visit(&mut |t| nested |= matches!(t, Term::Square(_)));
                    if nested {
                        errors.push(err(a.span, "nested square in side constraint".into()));
                    }
                }
                _ => {}
            });
        }
    }

    fn atom(&self, a: &Atom, scope: &[String], errors: &mut Vec<TypeError>) {
        self.term(&a.lhs, scope, a.span, errors);
        self.term(&a.rhs, scope, a.span, errors);
    }

    fn term(&self, t: &Term, scope: &[String], at: Span, errors: &mut Vec<TypeError>) {
        t.visit(&mut |sub| match sub {
            Term::Var { name, span } => {
                if !scope.contains(name) && !self.constants.contains_key(name) {
                    errors.push(err(*span, format!("unbound variable {name}")));
                }
            }
            Term::NetApply {
                net,
                args,
                output,
                span,
            } => match self.networks.get(net) {
                None => errors.push(err(*span, format!("unknown network {net}"))),
                Some(decl) => {
                    if args.len() != decl.input_dim {
                        errors.push(err(
                            *span,
                            format!("arity mismatch: expected {}, got {}", decl.input_dim, args.len()),
                        ));
                    }
                    if *output >= decl.output_dim {
                        errors.push(err(
                            *span,
                            format!(
                                "output index {output} out of range: network {net} has {} outputs",
                                decl.output_dim
                            ),
                        ));
                    }
                }
            },
            Term::NormDiff { left, right, .. }
                if left.len() != right.len() => {
                    errors.push(err(
                        at,
                        format!("norm operands differ in length: {} vs {}", left.len(), right.len()),
                    ));
                }
            _ => {}
        });
    }
}
