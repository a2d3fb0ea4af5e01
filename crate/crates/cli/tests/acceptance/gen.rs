//! Seeded generators for networks, queries and specifications.

use nspc_core::network::{Activation, Layer, Network};
use nspc_core::rational::Rational;
use nspc_core::spec_lang::{
    Atom, Cmp, ConstDecl, Formula, NetworkDecl, NormKind, Property, PropertySpec, QuantDomain, Quantifier, Span, Term,
};
use nspc_core::verifier::{LinearRow, OutputRow, QuadRow, VerifyQuery};
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// `k/4` with `k` uniform in `[lo, hi]`.
fn quarter(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    q(rng.gen_range(lo..=hi), 4)
}

/// A random ReLU network with 1–2 inputs, 1–2 hidden layers of 1–4
/// neurons, 1–2 outputs and parameters in quarter steps.
pub fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let mut widths = vec![rng.gen_range(1..=2)];
    for _ in 0..rng.gen_range(1..=2) {
        widths.push(rng.gen_range(1..=4));
    }
    widths.push(rng.gen_range(1..=2));
    let last = widths.len() - 2;
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let weights = (0..w[1]).map(|_| (0..w[0]).map(|_| quarter(rng, -8, 8)).collect()).collect();
            let bias = (0..w[1]).map(|_| quarter(rng, -4, 4)).collect();
            let act = if i == last { Activation::Identity } else { Activation::Relu };
            Layer::new(weights, bias, act)
        })
        .collect();
    Network::new(layers).expect("consistent widths")
}

/// A random linear violation query for `net`. The output thresholds are
/// placed near the smallest value seen on a grid so that both outcomes
/// occur.
pub fn random_query(rng: &mut ChaCha8Rng, net: &Network) -> VerifyQuery {
    let n = net.input_dim();
    let m = net.output_dim();
    let bounds: Vec<(Rational, Rational)> = (0..n)
        .map(|_| (quarter(rng, -4, 0), quarter(rng, 1, 4)))
        .collect();
    let linear = if rng.gen_bool(1.0 / 3.0) {
        vec![LinearRow {
            x: (0..n).map(|_| q(rng.gen_range(-2..=2), 1)).collect(),
            strict: rng.gen_bool(0.5),
            rhs: quarter(rng, -2, 4),
        }]
    } else {
        vec![]
    };
    let steps = 16;
    let grid: Vec<Vec<Rational>> = (0..(steps + 1usize).pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|i| {
                    let t = (k % (steps + 1)) as i64;
                    k /= steps + 1;
                    let (lo, hi) = &bounds[i];
                    lo + (hi - lo) * q(t, steps as i64)
                })
                .collect()
        })
        .filter(|x: &Vec<Rational>| {
            linear.iter().all(|r: &LinearRow| {
                let lhs = r.x.iter().zip(x).fold(Rational::zero(), |a, (c, v)| a + c * v);
                if r.strict {
                    lhs < r.rhs
                } else {
                    lhs <= r.rhs
                }
            })
        })
        .collect();
    let outputs: Vec<Vec<Rational>> = grid.iter().map(|x| net.eval_exact(x).expect("dimensions")).collect();
    let rows = rng.gen_range(1..=2);
    let output = (0..rows)
        .map(|_| {
            let mut d: Vec<Rational> = (0..m).map(|_| q(rng.gen_range(-2..=2), 1)).collect();
            if d.iter().all(Zero::is_zero) {
                d[0] = q(1, 1);
            }
            let min = outputs
                .iter()
                .map(|y| d.iter().zip(y).fold(Rational::zero(), |a, (c, v)| a + c * v))
                .min()
                .unwrap_or_else(Rational::zero);
            // Round the grid minimum to a multiple of 1/64, then shift.
            let base = (min * q(64, 1)).floor() / q(64, 1);
            OutputRow {
                x: vec![Rational::zero(); n],
                y: d,
                strict: rng.gen_bool(0.5),
                rhs: base + q(rng.gen_range(-6..=6), 16),
            }
        })
        .collect();
    VerifyQuery {
        network: "f".into(),
        outputs: m,
        bounds,
        linear,
        quadratic: vec![],
        output,
    }
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    let d = *[1, 2, 3, 4, 5, 7, 10].choose(rng).unwrap();
    q(rng.gen_range(-20..=20), d)
}

fn coefficients(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| if rng.gen_bool(0.3) { Rational::zero() } else { small_rational(rng) })
        .collect()
}

/// An arbitrary query (including quadratic rows) for export round trips.
pub fn random_export_query(rng: &mut ChaCha8Rng) -> VerifyQuery {
    let n = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=2);
    let bounds = (0..n)
        .map(|_| {
            let a = small_rational(rng);
            let b = small_rational(rng);
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    let linear = (0..rng.gen_range(0..=2))
        .map(|_| LinearRow {
            x: coefficients(rng, n),
            strict: rng.gen_bool(0.5),
            rhs: small_rational(rng),
        })
        .collect();
    let quadratic = (0..rng.gen_range(0..=2))
        .map(|_| {
            let mut square = small_rational(rng);
            if square.is_zero() {
                square = q(-1, 2);
            }
            QuadRow {
                x: coefficients(rng, n),
                var: rng.gen_range(0..n),
                square,
                strict: rng.gen_bool(0.5),
                rhs: small_rational(rng),
            }
        })
        .collect();
    let output = (0..rng.gen_range(1..=2))
        .map(|_| OutputRow {
            x: coefficients(rng, n),
            y: coefficients(rng, m),
            strict: rng.gen_bool(0.5),
            rhs: small_rational(rng),
        })
        .collect();
    VerifyQuery {
        network: ["f", "g", "ctrl"].choose(rng).unwrap().to_string(),
        outputs: m,
        bounds,
        linear,
        quadratic,
        output,
    }
}

const VARS: [&str; 4] = ["x", "y", "z", "w"];

fn var(name: &str) -> Term {
    Term::Var {
        name: name.into(),
        span: Span::default(),
    }
}

fn random_term(rng: &mut ChaCha8Rng, depth: u32, nets: &[NetworkDecl]) -> Term {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return if rng.gen_bool(0.6) {
            var(VARS.choose(rng).unwrap())
        } else {
            Term::Const(small_rational(rng))
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_term(rng, depth - 1, nets));
    match rng.gen_range(0..6) {
        0 => Term::Add(sub(rng), sub(rng)),
        1 => Term::Sub(sub(rng), sub(rng)),
        2 => {
            // A literal operand would be folded into a single constant.
            let mut inner = random_term(rng, depth - 1, nets);
            if matches!(inner, Term::Const(_)) {
                inner = var("x");
            }
            Term::ScalarMul(small_rational(rng), Box::new(inner))
        }
        3 => Term::Square(sub(rng)),
        4 => {
            let d = nets.choose(rng).unwrap();
            Term::NetApply {
                net: d.name.clone(),
                args: (0..d.input_dim).map(|_| random_term(rng, depth - 1, nets)).collect(),
                output: rng.gen_range(0..d.output_dim),
                span: Span::default(),
            }
        }
        _ => {
            let k = rng.gen_range(1..=2);
            Term::NormDiff {
                norm: if rng.gen_bool(0.5) { NormKind::Linf } else { NormKind::L1 },
                left: (0..k).map(|_| random_term(rng, depth - 1, nets)).collect(),
                right: (0..k).map(|_| random_term(rng, depth - 1, nets)).collect(),
            }
        }
    }
}

fn random_atom(rng: &mut ChaCha8Rng, nets: &[NetworkDecl]) -> Atom {
    let cmp = *[Cmp::Le, Cmp::Lt, Cmp::Ge, Cmp::Gt].choose(rng).unwrap();
    Atom::new(random_term(rng, 2, nets), cmp, random_term(rng, 2, nets))
}

fn random_formula(rng: &mut ChaCha8Rng, depth: u32, nets: &[NetworkDecl]) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return Formula::Atom(random_atom(rng, nets));
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1, nets);
    match rng.gen_range(0..6) {
        0 => Formula::and(sub(rng), sub(rng)),
        1 => Formula::or(sub(rng), sub(rng)),
        2 => Formula::implies(sub(rng), sub(rng)),
        3 => Formula::negation(sub(rng)),
        k => {
            let nv = rng.gen_range(1..=2);
            let vars: Vec<String> = VARS.choose_multiple(rng, nv).map(|s| s.to_string()).collect();
            let bounds = vars
                .iter()
                .map(|_| {
                    let a = small_rational(rng);
                    (a.clone(), a + small_rational(rng).abs())
                })
                .collect();
            let side_constraints = (0..rng.gen_range(0..=2)).map(|_| random_atom(rng, nets)).collect();
            let qf = Quantifier {
                vars,
                domain: QuantDomain {
                    bounds,
                    side_constraints,
                },
                body: Box::new(sub(rng)),
                span: Span::default(),
            };
            if k == 4 {
                Formula::Forall(qf)
            } else {
                Formula::Exists(qf)
            }
        }
    }
}

/// A random specification in the normal form the parser produces.
pub fn random_spec(rng: &mut ChaCha8Rng) -> PropertySpec {
    let networks: Vec<NetworkDecl> = ["f", "g"][..rng.gen_range(1..=2)]
        .iter()
        .map(|name| NetworkDecl {
            name: name.to_string(),
            input_dim: rng.gen_range(1..=3),
            output_dim: rng.gen_range(1..=2),
            span: Span::default(),
        })
        .collect();
    let constants = (0..rng.gen_range(0..=2))
        .map(|i| ConstDecl {
            name: format!("K{i}"),
            value: small_rational(rng),
            span: Span::default(),
        })
        .collect();
    let properties = (0..rng.gen_range(1..=3))
        .map(|i| Property {
            name: format!("p{i}"),
            formula: random_formula(rng, 3, &networks),
            span: Span::default(),
        })
        .collect();
    PropertySpec {
        networks,
        constants,
        properties,
    }
}

fn lawvere_atom(rng: &mut ChaCha8Rng, v: &str) -> String {
    let c = format!("{}/4", rng.gen_range(-8..=8));
    let op = ["<=", "<", ">=", ">"].choose(rng).unwrap();
    match rng.gen_range(0..3) {
        0 => format!("{v} {op} {c}"),
        1 => format!("f[{v}]!0 {op} {c}"),
        _ => format!("{v}*{v} - f[{v}]!0 {op} {c}"),
    }
}

fn lawvere_body(rng: &mut ChaCha8Rng, v: &str, depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return lawvere_atom(rng, v);
    }
    let a = lawvere_body(rng, v, depth - 1);
    let b = lawvere_body(rng, v, depth - 1);
    match rng.gen_range(0..3) {
        0 => format!("({a}) and ({b})"),
        1 => format!("({a}) or ({b})"),
        _ => format!("({}) => ({b})", lawvere_atom(rng, v)),
    }
}

/// A negation-free property `p` over `f : 1 -> 1` with one or two
/// quantifiers.
pub fn random_lawvere_spec(rng: &mut ChaCha8Rng) -> String {
    let quant = |rng: &mut ChaCha8Rng, v: &str| {
        let kw = if rng.gen_bool(0.5) { "forall" } else { "exists" };
        format!("{kw} {v} in [-1,1] . {}", lawvere_body(rng, v, 2))
    };
    let formula = if rng.gen_bool(0.5) {
        quant(rng, "x")
    } else {
        let op = if rng.gen_bool(0.5) { "and" } else { "or" };
        format!("({}) {op} ({})", quant(rng, "x"), quant(rng, "y"))
    };
    format!("network f : 1 -> 1\nprop p: {formula}\n")
}
