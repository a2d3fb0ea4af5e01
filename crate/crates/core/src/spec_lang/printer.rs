//! Fully parenthesised printer; `parse_spec(&print_spec(s))` reproduces `s`.

use super::ast::*;
use crate::rational::format_rational;
use std::fmt::Write;

pub fn print_spec(spec: &PropertySpec) -> String {
    let mut out = String::new();
    for n in &spec.networks {
        let _ = writeln!(out, "network {} : {} -> {}", n.name, n.input_dim, n.output_dim);
    }
    for c in &spec.constants {
        let _ = writeln!(out, "const {} = {}", c.name, format_rational(&c.value));
    }
    for p in &spec.properties {
        let _ = writeln!(out, "prop {}: {}", p.name, print_formula(&p.formula));
    }
    out
}

pub fn print_formula(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => print_atom(a),
        Formula::And(a, b) => format!("({}) and ({})", print_formula(a), print_formula(b)),
        Formula::Or(a, b) => format!("({}) or ({})", print_formula(a), print_formula(b)),
        Formula::Implies(a, b) => format!("({}) => ({})", print_formula(a), print_formula(b)),
        Formula::Not(a) => format!("not ({})", print_formula(a)),
        Formula::Forall(q) => print_quantifier("forall", q),
        Formula::Exists(q) => print_quantifier("exists", q),
    }
}

fn print_quantifier(keyword: &str, q: &Quantifier) -> String {
    let binders: Vec<String> = q
        .vars
        .iter()
        .zip(&q.domain.bounds)
        .map(|(v, (lo, hi))| format!("{v} in [{}, {}]", format_rational(lo), format_rational(hi)))
        .collect();
    let mut s = format!("{keyword} {}", binders.join(", "));
    if !q.domain.side_constraints.is_empty() {
        let sides: Vec<String> = q.domain.side_constraints.iter().map(print_atom).collect();
        let _ = write!(s, " where {}", sides.join(" and "));
    }
    let _ = write!(s, " . ({})", print_formula(&q.body));
    s
}

pub fn print_atom(a: &Atom) -> String {
    format!("{} {} {}", print_term(&a.lhs), a.cmp.symbol(), print_term(&a.rhs))
}

pub fn print_term(t: &Term) -> String {
    match t {
        Term::Var { name, .. } => name.clone(),
        Term::Const(q) => format!("({})", format_rational(q)),
        Term::Add(a, b) => format!("({}) + ({})", print_term(a), print_term(b)),
        Term::Sub(a, b) => format!("({}) - ({})", print_term(a), print_term(b)),
        Term::ScalarMul(c, a) => format!("({}) * ({})", format_rational(c), print_term(a)),
        Term::Square(a) => format!("({})^2", print_term(a)),
        Term::NetApply {
            net, args, output, ..
        } => format!("{net}[{}]!{output}", print_list(args)),
        Term::NormDiff { norm, left, right } => format!(
            "{}([{}], [{}])",
            norm.keyword(),
            print_list(left),
            print_list(right)
        ),
    }
}

fn print_list(items: &[Term]) -> String {
    items.iter().map(print_term).collect::<Vec<_>>().join(", ")
}
