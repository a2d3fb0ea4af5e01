//! The embedding bridge: from a verified network property to the
//! corresponding property of the solution `u ∘ f ∘ e`.
//!
//! Both properties are given as compiled violation queries: the verified
//! ones over network coordinates, the problem ones over problem units with
//! the solution standing in for the network. Every problem query is mapped
//! through `e` (inputs) and `u` (outputs) into network coordinates. If the
//! mapped region is contained in some verified query's region, the mapped
//! query is unsatisfiable too, so the problem property holds.
//!
//! Containment is checked row by row: each constraint of the verified
//! query must be implied by a positive multiple of one mapped constraint
//! (or, for linear input rows, by the mapped box). No sampling is involved.

use crate::network::EmbeddingSpec;
use crate::rational::{format_rational, Rational};
use crate::verifier::{LinearRow, OutputRow, QuadRow, VerifyQuery};
use num_traits::{Signed, Zero};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BridgeCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct BridgeReport {
    pub checks: Vec<BridgeCheck>,
}

impl BridgeReport {
    pub fn all_pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

/// Problem query `problem` rewritten in network coordinates.
fn map_query(emb: &EmbeddingSpec, problem: &VerifyQuery) -> Option<VerifyQuery> {
    let ins = &emb.input_map;
    let outs = &emb.output_map;
    if ins.len() != problem.inputs() || outs.len() != problem.outputs {
        return None;
    }
    // x = (xn − o)/s, so a·x = (a/s)·xn − a·o/s.
    let map_x = |x: &[Rational]| -> (Vec<Rational>, Rational) {
        let mut shift = Rational::zero();
        let coeffs = x
            .iter()
            .zip(ins)
            .map(|(a, m)| {
                shift += a * &m.offset / &m.scale;
                a / &m.scale
            })
            .collect();
        (coeffs, shift)
    };
    let bounds = problem
        .bounds
        .iter()
        .zip(ins)
        .map(|((lo, hi), m)| (m.apply(lo), m.apply(hi)))
        .collect();
    let linear = problem
        .linear
        .iter()
        .map(|r| {
            let (x, shift) = map_x(&r.x);
            LinearRow {
                x,
                strict: r.strict,
                rhs: &r.rhs + shift,
            }
        })
        .collect();
    let quadratic = problem
        .quadratic
        .iter()
        .map(|r| {
            let (mut x, shift) = map_x(&r.x);
            let m = &ins[r.var];
            let s2 = &m.scale * &m.scale;
            // c·x_v² = (c/s²)(xn_v² − 2 o xn_v + o²)
            let square = &r.square / &s2;
            x[r.var] -= &square * &m.offset * Rational::from_integer(2.into());
            QuadRow {
                x,
                var: r.var,
                rhs: &r.rhs + shift - &square * &m.offset * &m.offset,
                square,
                strict: r.strict,
            }
        })
        .collect();
    let output = problem
        .output
        .iter()
        .map(|r| {
            let (x, shift) = map_x(&r.x);
            // d·a = d·(s·y + o)
            let mut out_shift = Rational::zero();
            let y = r
                .y
                .iter()
                .zip(outs)
                .map(|(d, m)| {
                    out_shift += d * &m.offset;
                    d * &m.scale
                })
                .collect();
            OutputRow {
                x,
                y,
                strict: r.strict,
                rhs: &r.rhs + shift - out_shift,
            }
        })
        .collect();
    Some(VerifyQuery {
        network: problem.network.clone(),
        outputs: problem.outputs,
        bounds,
        linear,
        quadratic,
        output,
    })
}

/// Does `k·(coeffs_m, rhs_m)` for some `k > 0` imply `(coeffs_v, rhs_v)`?
fn implies(coeffs_m: &[Rational], rhs_m: &Rational, strict_m: bool, coeffs_v: &[Rational], rhs_v: &Rational, strict_v: bool) -> bool {
    if coeffs_m.len() != coeffs_v.len() {
        return false;
    }
    let Some(i) = coeffs_m.iter().position(|c| !c.is_zero()) else {
        // `0 (<) rhs_m` is either unsatisfiable, implying anything, or
        // carries no information.
        let zero = Rational::zero();
        return !holds(&zero, strict_m, rhs_m) || (coeffs_v.iter().all(Zero::is_zero) && holds(&zero, strict_v, rhs_v));
    };
    let k = &coeffs_v[i] / &coeffs_m[i];
    if !k.is_positive() || coeffs_m.iter().zip(coeffs_v).any(|(m, v)| &k * m != *v) {
        return false;
    }
    let scaled = &k * rhs_m;
    scaled < *rhs_v || (scaled == *rhs_v && (strict_m || !strict_v))
}

fn holds(lhs: &Rational, strict: bool, rhs: &Rational) -> bool {
    if strict {
        lhs < rhs
    } else {
        lhs <= rhs
    }
}

fn quad_coeffs(r: &QuadRow) -> Vec<Rational> {
    let mut c = r.x.clone();
    for v in 0..r.x.len() {
        c.push(if v == r.var { r.square.clone() } else { Rational::zero() });
    }
    c
}

fn output_coeffs(r: &OutputRow) -> Vec<Rational> {
    r.x.iter().chain(&r.y).cloned().collect()
}

/// Failures of "mapped input region ⊆ verified input region".
fn input_failures(m: &VerifyQuery, v: &VerifyQuery) -> Vec<String> {
    let mut fails = Vec::new();
    for (i, ((ml, mh), (vl, vh))) in m.bounds.iter().zip(&v.bounds).enumerate() {
        if ml < vl || mh > vh {
            fails.push(format!(
                "box of x{i}: embedded [{}, {}] is not inside verified [{}, {}]",
                format_rational(ml),
                format_rational(mh),
                format_rational(vl),
                format_rational(vh)
            ));
        }
    }
    for (j, vr) in v.linear.iter().enumerate() {
        let by_box = {
            let max = vr.x.iter().zip(&m.bounds).fold(Rational::zero(), |acc, (a, (lo, hi))| {
                acc + if a.is_negative() { a * lo } else { a * hi }
            });
            holds(&max, vr.strict, &vr.rhs)
        };
        let by_row = m
            .linear
            .iter()
            .any(|mr| implies(&mr.x, &mr.rhs, mr.strict, &vr.x, &vr.rhs, vr.strict));
        if !(by_box || by_row) {
            fails.push(format!("verified linear constraint {j} is not implied"));
        }
    }
    for (j, vr) in v.quadratic.iter().enumerate() {
        let target = quad_coeffs(vr);
        if !m
            .quadratic
            .iter()
            .any(|mr| implies(&quad_coeffs(mr), &mr.rhs, mr.strict, &target, &vr.rhs, vr.strict))
        {
            fails.push(format!("verified quadratic constraint {j} is not implied"));
        }
    }
    fails
}

/// Failures of "mapped violation ⊆ verified violation" on output rows.
fn output_failures(m: &VerifyQuery, v: &VerifyQuery) -> Vec<String> {
    let mut fails = Vec::new();
    if m.outputs != v.outputs {
        fails.push("output dimensions differ".into());
        return fails;
    }
    for (j, vr) in v.output.iter().enumerate() {
        let target = output_coeffs(vr);
        if !m
            .output
            .iter()
            .any(|mr| implies(&output_coeffs(mr), &mr.rhs, mr.strict, &target, &vr.rhs, vr.strict))
        {
            fails.push(format!("verified output condition {j} is not implied"));
        }
    }
    fails
}

/// Checks that every problem-space violation query, mapped through the
/// embedding, falls inside one of the `verified` queries: (a) input region
/// containment and (b) output bound implication.
pub fn check_embedding_bridge(emb: &EmbeddingSpec, verified: &[VerifyQuery], problem: &[VerifyQuery]) -> BridgeReport {
    let mut report = BridgeReport::default();
    for (pi, p) in problem.iter().enumerate() {
        let Some(m) = map_query(emb, p) else {
            report.checks.push(BridgeCheck {
                name: format!("clause {pi}: dimensions"),
                passed: false,
                detail: "embedding dimensions do not match the problem property".into(),
            });
            continue;
        };
        let results: Vec<(Vec<String>, Vec<String>)> = verified
            .iter()
            .map(|v| {
                if v.inputs() != m.inputs() {
                    (vec!["input dimensions differ".into()], vec![])
                } else {
                    (input_failures(&m, v), output_failures(&m, v))
                }
            })
            .collect();
        let pick = results
            .iter()
            .position(|(a, b)| a.is_empty() && b.is_empty())
            .or_else(|| results.iter().position(|(a, _)| a.is_empty()))
            .unwrap_or(0);
        let (a, b) = results
            .get(pick)
            .cloned()
            .unwrap_or_else(|| (vec!["no verified query".into()], vec!["no verified query".into()]));
        for (label, fails) in [("(a) input region", a), ("(b) output bound", b)] {
            report.checks.push(BridgeCheck {
                name: format!("clause {pi} {label} vs verified query {pick}"),
                passed: fails.is_empty(),
                detail: if fails.is_empty() {
                    "contained".into()
                } else {
                    fails.join("; ")
                },
            });
        }
    }
    report
}
