//! Leaf-system reconstruction: interval bounds under a node's box and
//! phases, then the canonical rows in certificate order.

use nspc_core::network::{Activation, Network};
use nspc_core::rational::Rational;
use nspc_core::verifier::VerifyQuery;
use num_traits::{One, Signed, Zero};

/// A sparse row `Σ coeff·v (< | ≤) rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub terms: Vec<(usize, Rational)>,
    pub rhs: Rational,
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixed {
    Active,
    Inactive,
}

/// The region of a tree node: its input box and fixed ReLU phases.
#[derive(Debug, Clone)]
pub struct Node {
    pub input_box: Vec<(Rational, Rational)>,
    pub phases: Vec<Vec<Option<Fixed>>>,
}

impl Node {
    pub fn root(net: &Network, query: &VerifyQuery) -> Node {
        let layers = net.layers();
        Node {
            input_box: query.bounds.clone(),
            phases: layers[..layers.len() - 1]
                .iter()
                .map(|l| vec![None; l.outputs()])
                .collect(),
        }
    }
}

enum Encoding {
    Active,
    Inactive,
    Triangle,
    Linear,
}

/// Rebuilds the rows of the leaf at `node`; returns `(variable count, rows)`.
pub fn leaf_rows(net: &Network, query: &VerifyQuery, node: &Node) -> (usize, Vec<Row>) {
    let layers = net.layers();
    let hidden = &layers[..layers.len() - 1];
    let n_in = net.input_dim();
    let n_vars = n_in + hidden.iter().map(|l| 2 * l.outputs()).sum::<usize>() + net.output_dim();
    let mut rows = Vec::new();
    let one = Rational::one;
    let minus = || -Rational::one();
    let mut row = |terms: Vec<(usize, Rational)>, rhs: Rational, strict: bool| rows.push(Row { terms, rhs, strict });

    for (i, (lo, hi)) in node.input_box.iter().enumerate() {
        row(vec![(i, one())], hi.clone(), false);
        row(vec![(i, minus())], -lo, false);
    }
    for r in &query.linear {
        row(dense_to_terms(&r.x, 0), r.rhs.clone(), r.strict);
    }
    for q in &query.quadratic {
        let (lo, hi) = &node.input_box[q.var];
        // square·v² is replaced by a line below it (tangents, square > 0)
        // or the secant above it (square < 0).
        let lines: Vec<(Rational, Rational)> = if q.square.is_positive() {
            [lo, hi]
                .iter()
                .map(|a| {
                    let a = (*a).clone();
                    (&q.square * (&a + &a), &q.square * &a * &a)
                })
                .collect()
        } else {
            vec![(&q.square * (lo + hi), &q.square * lo * hi)]
        };
        for (slope, shift) in lines {
            let mut terms = dense_to_terms(&q.x, 0);
            terms.push((q.var, slope));
            row(terms, &q.rhs + shift, q.strict);
        }
    }

    // Interval pass, emitting hidden-neuron rows as we go.
    let mut feed_vars: Vec<usize> = (0..n_in).collect();
    let mut feed_bounds: Vec<(Rational, Rational)> = node.input_box.clone();
    let mut next_var = n_in;
    for (l, layer) in hidden.iter().enumerate() {
        let mut vars = Vec::new();
        let mut bounds = Vec::new();
        for j in 0..layer.outputs() {
            let (z, y) = (next_var, next_var + 1);
            next_var += 2;
            let w = &layer.weights[j];
            let b = &layer.bias[j];
            let (lo, hi) = affine_bounds(w, b, &feed_bounds);
            equality(&mut row, z, w, &feed_vars, b);
            row(vec![(z, one())], hi.clone(), false);
            row(vec![(z, minus())], -&lo, false);
            let enc = match (layer.activation, node.phases[l][j]) {
                (Activation::Identity, _) => Encoding::Linear,
                (Activation::Relu, Some(Fixed::Active)) => Encoding::Active,
                (Activation::Relu, Some(Fixed::Inactive)) => Encoding::Inactive,
                (Activation::Relu, None) if !lo.is_negative() => Encoding::Active,
                (Activation::Relu, None) if !hi.is_positive() => Encoding::Inactive,
                (Activation::Relu, None) => Encoding::Triangle,
            };
            let zero = Rational::zero;
            let post = match enc {
                Encoding::Active | Encoding::Linear => {
                    row(vec![(y, one()), (z, minus())], zero(), false);
                    row(vec![(z, one()), (y, minus())], zero(), false);
                    if matches!(enc, Encoding::Active) {
                        row(vec![(z, minus())], zero(), false);
                        (relu(&lo), relu(&hi))
                    } else {
                        row(vec![], zero(), false);
                        (lo.clone(), hi.clone())
                    }
                }
                Encoding::Inactive => {
                    row(vec![(y, one())], zero(), false);
                    row(vec![(y, minus())], zero(), false);
                    row(vec![(z, one())], zero(), false);
                    (zero(), zero())
                }
                Encoding::Triangle => {
                    row(vec![(y, minus())], zero(), false);
                    row(vec![(z, one()), (y, minus())], zero(), false);
                    row(vec![(y, &hi - &lo), (z, -&hi)], -(&hi * &lo), false);
                    (zero(), hi.clone())
                }
            };
            row(vec![(y, one())], post.1.clone(), false);
            row(vec![(y, minus())], -&post.0, false);
            vars.push(y);
            bounds.push(post);
        }
        feed_vars = vars;
        feed_bounds = bounds;
    }

    let last = &layers[layers.len() - 1];
    let out_base = next_var;
    for k in 0..last.outputs() {
        equality(&mut row, out_base + k, &last.weights[k], &feed_vars, &last.bias[k]);
    }
    for r in &query.output {
        let mut terms = dense_to_terms(&r.x, 0);
        terms.extend(dense_to_terms(&r.y, out_base));
        row(terms, r.rhs.clone(), r.strict);
    }
    (n_vars, rows)
}

fn relu(v: &Rational) -> Rational {
    if v.is_negative() {
        Rational::zero()
    } else {
        v.clone()
    }
}

fn affine_bounds(w: &[Rational], b: &Rational, inputs: &[(Rational, Rational)]) -> (Rational, Rational) {
    let mut lo = b.clone();
    let mut hi = b.clone();
    for (c, (l, h)) in w.iter().zip(inputs) {
        if c.is_negative() {
            lo += c * h;
            hi += c * l;
        } else {
            lo += c * l;
            hi += c * h;
        }
    }
    (lo, hi)
}

fn dense_to_terms(coeffs: &[Rational], offset: usize) -> Vec<(usize, Rational)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (offset + i, c.clone()))
        .collect()
}

/// `t − w·v ≤ b` then `−t + w·v ≤ −b`.
fn equality(
    row: &mut impl FnMut(Vec<(usize, Rational)>, Rational, bool),
    target: usize,
    w: &[Rational],
    vars: &[usize],
    b: &Rational,
) {
    let mut up = vec![(target, Rational::one())];
    up.extend(vars.iter().zip(w).map(|(v, c)| (*v, -c)));
    row(up, b.clone(), false);
    let mut down = vec![(target, -Rational::one())];
    down.extend(vars.iter().zip(w).map(|(v, c)| (*v, c.clone())));
    row(down, -b, false);
}
