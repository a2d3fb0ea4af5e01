//! Abstract syntax of property specifications.

use crate::rational::Rational;
use std::fmt;

/// Source position (1-based). Spans never participate in structural
/// equality, so a reparsed AST compares equal to the original.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }

    /// The comparison satisfied exactly when `self` is not.
    pub fn negate(self) -> Cmp {
        match self {
            Cmp::Le => Cmp::Gt,
            Cmp::Lt => Cmp::Ge,
            Cmp::Ge => Cmp::Lt,
            Cmp::Gt => Cmp::Le,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Cmp::Lt | Cmp::Gt)
    }

    pub fn holds<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Gt => lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Linf,
    L1,
}

impl NormKind {
    pub fn keyword(self) -> &'static str {
        match self {
            NormKind::Linf => "linf",
            NormKind::L1 => "l1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var {
        name: String,
        span: Span,
    },
    Const(Rational),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    ScalarMul(Rational, Box<Term>),
    Square(Box<Term>),
    NetApply {
        net: String,
        args: Vec<Term>,
        output: usize,
        span: Span,
    },
    NormDiff {
        norm: NormKind,
        left: Vec<Term>,
        right: Vec<Term>,
    },
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var {
            name: name.into(),
            span: Span::default(),
        }
    }

    pub fn constant(q: Rational) -> Term {
        Term::Const(q)
    }

    pub fn net(net: impl Into<String>, args: Vec<Term>, output: usize) -> Term {
        Term::NetApply {
            net: net.into(),
            args,
            output,
            span: Span::default(),
        }
    }

    /// Pre-order traversal of this term and all subterms.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Term)) {
        f(self);
        match self {
            Term::Var { .. } | Term::Const(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Term::ScalarMul(_, t) | Term::Square(t) => t.visit(f),
            Term::NetApply { args, .. } => args.iter().for_each(|a| a.visit(f)),
            Term::NormDiff { left, right, .. } => {
                left.iter().chain(right).for_each(|a| a.visit(f))
            }
        }
    }
}

/// Resolves variable names to exact values.
pub type VarLookup<'a> = &'a dyn Fn(&str) -> Option<Rational>;
/// Evaluates `net(args)` exactly, returning all outputs.
pub type NetLookup<'a> = &'a mut dyn FnMut(&str, &[Rational]) -> Option<Vec<Rational>>;

impl Term {
    /// Exact value of the term, or `None` when a variable or network
    /// application cannot be resolved.
    pub fn eval_exact(&self, var: VarLookup<'_>, net: NetLookup<'_>) -> Option<Rational> {
        Some(match self {
            Term::Var { name, .. } => var(name)?,
            Term::Const(q) => q.clone(),
            Term::Add(a, b) => a.eval_exact(var, net)? + b.eval_exact(var, net)?,
            Term::Sub(a, b) => a.eval_exact(var, net)? - b.eval_exact(var, net)?,
            Term::ScalarMul(c, t) => c * t.eval_exact(var, net)?,
            Term::Square(t) => {
                let v = t.eval_exact(var, net)?;
                &v * &v
            }
            Term::NetApply {
                net: name,
                args,
                output,
                ..
            } => {
                let xs = args
                    .iter()
                    .map(|a| a.eval_exact(var, net))
                    .collect::<Option<Vec<_>>>()?;
                net(name, &xs)?.get(*output)?.clone()
            }
            Term::NormDiff { norm, left, right } => {
                let mut acc = Rational::from_integer(0.into());
                for (l, r) in left.iter().zip(right) {
                    let d = l.eval_exact(var, net)? - r.eval_exact(var, net)?;
                    let d = if d < Rational::from_integer(0.into()) { -d } else { d };
                    acc = match norm {
                        NormKind::Linf => {
                            if d > acc {
                                d
                            } else {
                                acc
                            }
                        }
                        NormKind::L1 => acc + d,
                    };
                }
                acc
            }
        })
    }
}

/// `lhs cmp rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub cmp: Cmp,
    pub lhs: Term,
    pub rhs: Term,
    pub span: Span,
}

impl Atom {
    pub fn new(lhs: Term, cmp: Cmp, rhs: Term) -> Atom {
        Atom {
            cmp,
            lhs,
            rhs,
            span: Span::default(),
        }
    }
}

impl Atom {
    /// Exact truth value; see [`Term::eval_exact`].
    pub fn holds_exact(&self, var: VarLookup<'_>, net: NetLookup<'_>) -> Option<bool> {
        let l = self.lhs.eval_exact(var, net)?;
        let r = self.rhs.eval_exact(var, net)?;
        Some(self.cmp.holds(&l, &r))
    }
}

/// Per-variable closed box plus side constraints over the bound variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantDomain {
    pub bounds: Vec<(Rational, Rational)>,
    pub side_constraints: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantifier {
    pub vars: Vec<String>,
    pub domain: QuantDomain,
    pub body: Box<Formula>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(Atom),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Quantifier),
    Exists(Quantifier),
}

impl Formula {
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn negation(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    pub fn forall(vars: Vec<String>, domain: QuantDomain, body: Formula) -> Formula {
        Formula::Forall(Quantifier {
            vars,
            domain,
            body: Box::new(body),
            span: Span::default(),
        })
    }

    /// Visits every atom, including quantifier side constraints.
    pub fn visit_atoms<'a>(&'a self, f: &mut dyn FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Formula::Not(a) => a.visit_atoms(f),
            Formula::Forall(q) | Formula::Exists(q) => {
                q.domain.side_constraints.iter().for_each(&mut *f);
                q.body.visit_atoms(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDecl {
    pub name: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Rational,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub name: String,
    pub formula: Formula,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertySpec {
    pub networks: Vec<NetworkDecl>,
    pub constants: Vec<ConstDecl>,
    pub properties: Vec<Property>,
}

impl PropertySpec {
    pub fn network(&self, name: &str) -> Option<&NetworkDecl> {
        self.networks.iter().find(|n| n.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<&ConstDecl> {
        self.constants.iter().find(|c| c.name == name)
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }
}
