//! Line-oriented query text for external reachability solvers.
//!
//! ```text
//! Query
//! Network f
//! Inputs 2
//! Outputs 1
//! Bound x0 -1 1
//! Bound x1 -1 1
//! Linear 1 x0 -1 x1 <= 0
//! Quadratic -5 x1 25/2 x0^2 < 5
//! # linear relaxation of the preceding quadratic over the input box
//! Relaxed -25 x0 -5 x1 < 35/2
//! Output -1 y0 < 1/5
//! End
//! ```
//!
//! A file holds one or more `Query … End` blocks. Terms are `coef var`
//! pairs with inputs `x<i>`, outputs `y<k>` and at most one square
//! `x<i>^2`; rationals are integers or `a/b`; comparisons are `<=` or `<`.
//! `Relaxed` lines are derived data for solvers without quadratic support
//! and are ignored when parsing. `#` starts a comment line.

use super::query::{LinearRow, OutputRow, QuadRow, VerifyQuery};
use crate::rational::{format_rational, parse_rational, Rational};
use num_traits::{Signed, Zero};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query text line {line}: {message}")]
pub struct QueryParseError {
    pub line: usize,
    pub message: String,
}

fn op(strict: bool) -> &'static str {
    if strict {
        "<"
    } else {
        "<="
    }
}

fn terms(out: &mut String, coeffs: &[Rational], var: char) {
    for (i, c) in coeffs.iter().enumerate() {
        if !c.is_zero() {
            let _ = write!(out, " {} {var}{i}", format_rational(c));
        }
    }
}

pub fn export_query(q: &VerifyQuery) -> String {
    export_queries(std::slice::from_ref(q))
}

pub fn export_queries(queries: &[VerifyQuery]) -> String {
    let mut s = String::new();
    for q in queries {
        s.push_str("Query\n");
        let _ = writeln!(s, "Network {}", q.network);
        let _ = writeln!(s, "Inputs {}", q.inputs());
        let _ = writeln!(s, "Outputs {}", q.outputs);
        for (i, (lo, hi)) in q.bounds.iter().enumerate() {
            let _ = writeln!(s, "Bound x{i} {} {}", format_rational(lo), format_rational(hi));
        }
        for r in &q.linear {
            s.push_str("Linear");
            terms(&mut s, &r.x, 'x');
            let _ = writeln!(s, " {} {}", op(r.strict), format_rational(&r.rhs));
        }
        for r in &q.quadratic {
            s.push_str("Quadratic");
            terms(&mut s, &r.x, 'x');
            let _ = writeln!(
                s,
                " {} x{}^2 {} {}",
                format_rational(&r.square),
                r.var,
                op(r.strict),
                format_rational(&r.rhs)
            );
            s.push_str("# linear relaxation of the preceding quadratic over the input box\n");
            let (lo, hi) = &q.bounds[r.var];
            let lines: Vec<(Rational, Rational)> = if r.square.is_positive() {
                let two = Rational::from_integer(2.into());
                [lo, hi]
                    .into_iter()
                    .map(|a| (&two * &r.square * a, &r.square * a * a))
                    .collect()
            } else {
                vec![(&r.square * (lo + hi), &r.square * lo * hi)]
            };
            for (slope, shift) in lines {
                let mut coeffs = r.x.clone();
                coeffs[r.var] += slope;
                s.push_str("Relaxed");
                terms(&mut s, &coeffs, 'x');
                let _ = writeln!(s, " {} {}", op(r.strict), format_rational(&(&r.rhs + shift)));
            }
        }
        for r in &q.output {
            s.push_str("Output");
            terms(&mut s, &r.x, 'x');
            terms(&mut s, &r.y, 'y');
            let _ = writeln!(s, " {} {}", op(r.strict), format_rational(&r.rhs));
        }
        s.push_str("End\n");
    }
    s
}

struct Parsed {
    x: Vec<Rational>,
    y: Vec<Rational>,
    square: Option<(usize, Rational)>,
    strict: bool,
    rhs: Rational,
}

fn index(tok: &str, prefix: char, limit: usize) -> Result<usize, String> {
    let rest = tok
        .strip_prefix(prefix)
        .ok_or_else(|| format!("expected a {prefix}-variable, found `{tok}`"))?;
    let i: usize = rest.parse().map_err(|_| format!("bad variable `{tok}`"))?;
    if i >= limit {
        return Err(format!("variable `{tok}` out of range"));
    }
    Ok(i)
}

fn parse_row(toks: &[&str], n: usize, m: usize) -> Result<Parsed, String> {
    if toks.len() < 2 || !toks.len().is_multiple_of(2) {
        return Err("expected `coef var` pairs followed by `<=|< rhs`".into());
    }
    let (pairs, tail) = toks.split_at(toks.len() - 2);
    let strict = match tail[0] {
        "<=" => false,
        "<" => true,
        other => return Err(format!("expected `<=` or `<`, found `{other}`")),
    };
    let rhs = parse_rational(tail[1]).map_err(|e| e.to_string())?;
    let mut p = Parsed {
        x: vec![Rational::zero(); n],
        y: vec![Rational::zero(); m],
        square: None,
        strict,
        rhs,
    };
    for pair in pairs.chunks(2) {
        let c = parse_rational(pair[0]).map_err(|e| e.to_string())?;
        let v = pair[1];
        if let Some(base) = v.strip_suffix("^2") {
            if p.square.is_some() {
                return Err("at most one square term per row".into());
            }
            p.square = Some((index(base, 'x', n)?, c));
        } else if v.starts_with('y') {
            let k = index(v, 'y', m)?;
            p.y[k] += c;
        } else {
            let i = index(v, 'x', n)?;
            p.x[i] += c;
        }
    }
    Ok(p)
}

/// Parses every `Query … End` block of `text`.
pub fn parse_queries(text: &str) -> Result<Vec<VerifyQuery>, QueryParseError> {
    let mut out = Vec::new();
    let mut cur: Option<(VerifyQuery, Option<usize>)> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |message: String| QueryParseError { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let (head, rest) = (toks[0], &toks[1..]);
        match (head, &mut cur) {
            ("Query", None) => {
                cur = Some((
                    VerifyQuery {
                        network: String::new(),
                        outputs: 0,
                        bounds: Vec::new(),
                        linear: Vec::new(),
                        quadratic: Vec::new(),
                        output: Vec::new(),
                    },
                    None,
                ));
            }
            ("Query", Some(_)) => return Err(err("`Query` before `End`".into())),
            (_, None) => return Err(err(format!("`{head}` outside a Query block"))),
            ("End", Some((q, inputs))) => {
                if inputs.is_none() || q.network.is_empty() || q.outputs == 0 {
                    return Err(err("query is missing its Network, Inputs or Outputs line".into()));
                }
                if Some(q.bounds.len()) != *inputs {
                    return Err(err(format!(
                        "expected {} Bound lines, found {}",
                        inputs.unwrap_or(0),
                        q.bounds.len()
                    )));
                }
                out.push(cur.take().expect("inside block").0);
            }
            ("Network", Some((q, _))) => match rest {
                [name] => q.network = name.to_string(),
                _ => return Err(err("expected `Network <name>`".into())),
            },
            ("Inputs", Some((_, inputs))) => {
                let n: usize = rest
                    .first()
                    .and_then(|t| t.parse().ok())
                    .filter(|&n| n > 0 && rest.len() == 1)
                    .ok_or_else(|| err("expected `Inputs <positive count>`".into()))?;
                *inputs = Some(n);
            }
            ("Outputs", Some((q, _))) => {
                q.outputs = rest
                    .first()
                    .and_then(|t| t.parse().ok())
                    .filter(|&n| n > 0 && rest.len() == 1)
                    .ok_or_else(|| err("expected `Outputs <positive count>`".into()))?;
            }
            ("Bound", Some((q, _))) => {
                let [var, lo, hi] = rest else {
                    return Err(err("expected `Bound x<i> <lo> <hi>`".into()));
                };
                let expected = format!("x{}", q.bounds.len());
                if *var != expected {
                    return Err(err(format!("expected bound for {expected}, found {var}")));
                }
                let lo = parse_rational(lo).map_err(|e| err(e.to_string()))?;
                let hi = parse_rational(hi).map_err(|e| err(e.to_string()))?;
                if lo > hi {
                    return Err(err(format!("empty bound for {var}")));
                }
                q.bounds.push((lo, hi));
            }
            ("Relaxed", Some(_)) => {}
            ("Linear" | "Quadratic" | "Output", Some((q, inputs))) => {
                let n = inputs.ok_or_else(|| err("`Inputs` must precede constraint lines".into()))?;
                if q.outputs == 0 {
                    return Err(err("`Outputs` must precede constraint lines".into()));
                }
                let p = parse_row(rest, n, q.outputs).map_err(err)?;
                match head {
                    "Linear" | "Quadratic" if p.y.iter().any(|v| !v.is_zero()) => {
                        return Err(err(format!("{head} rows cannot mention outputs")))
                    }
                    "Linear" if p.square.is_some() => return Err(err("Linear rows cannot contain squares".into())),
                    "Linear" => q.linear.push(LinearRow {
                        x: p.x,
                        strict: p.strict,
                        rhs: p.rhs,
                    }),
                    "Quadratic" => match p.square {
                        Some((var, square)) if !square.is_zero() => q.quadratic.push(QuadRow {
                            x: p.x,
                            var,
                            square,
                            strict: p.strict,
                            rhs: p.rhs,
                        }),
                        _ => return Err(err("Quadratic rows need one nonzero square term".into())),
                    },
                    _ => {
                        if p.square.is_some() {
                            return Err(err("Output rows cannot contain squares".into()));
                        }
                        q.output.push(OutputRow {
                            x: p.x,
                            y: p.y,
                            strict: p.strict,
                            rhs: p.rhs,
                        })
                    }
                }
            }
            (other, Some(_)) => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    if cur.is_some() {
        return Err(QueryParseError {
            line: text.lines().count(),
            message: "missing `End`".into(),
        });
    }
    Ok(out)
}
