//! The canonical leaf system of a branch-and-bound node.
//!
//! The layout is part of the certificate format: the independent checker
//! rebuilds the same rows in the same order, and witnesses are indexed by
//! row. Variables are the inputs `x`, then `(z, y)` per hidden neuron in
//! layer-major order, then the outputs `o`. Rows, in order:
//!
//! 1. input box: `x ≤ hi`, `-x ≤ -lo` per input;
//! 2. linear side constraints;
//! 3. quadratic relaxations: two tangent rows when the square coefficient is
//!    positive, one secant row when it is negative;
//! 4. per hidden neuron: the affine equality as two rows, the IBP
//!    pre-activation bounds, three activation rows, the post-activation bounds;
//! 5. per output: the affine equality as two rows;
//! 6. the negated property rows.

use super::interval::{IntervalBox, NeuronState};
use super::lp::{FarkasWitness, LinearSystem};
use super::query::VerifyQuery;
use crate::network::Network;
use crate::rational::Rational;
use num_traits::{One, Signed, Zero};

/// Variable indices of a leaf system.
#[derive(Debug, Clone)]
pub struct Layout {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    hidden_base: Vec<usize>,
    pub n_vars: usize,
}

impl Layout {
    pub fn new(net: &Network) -> Layout {
        let hidden = net.hidden_widths();
        let mut hidden_base = Vec::with_capacity(hidden.len());
        let mut next = net.input_dim();
        for &w in &hidden {
            hidden_base.push(next);
            next += 2 * w;
        }
        Layout {
            inputs: net.input_dim(),
            outputs: net.output_dim(),
            n_vars: next + net.output_dim(),
            hidden,
            hidden_base,
        }
    }

    pub fn z(&self, layer: usize, j: usize) -> usize {
        self.hidden_base[layer] + 2 * j
    }

    pub fn y(&self, layer: usize, j: usize) -> usize {
        self.hidden_base[layer] + 2 * j + 1
    }

    pub fn out(&self, k: usize) -> usize {
        self.n_vars - self.outputs + k
    }

    /// Variables feeding layer `l` (inputs for the first layer).
    fn feeding(&self, l: usize) -> Vec<usize> {
        if l == 0 {
            (0..self.inputs).collect()
        } else {
            (0..self.hidden[l - 1]).map(|j| self.y(l - 1, j)).collect()
        }
    }
}

/// Builds the leaf system for the node with box `input_box` and bounds `ibp`
/// (already computed under the node's phases).
pub fn build_leaf_system(
    net: &Network,
    query: &VerifyQuery,
    input_box: &[(Rational, Rational)],
    ibp: &IntervalBox,
) -> LinearSystem {
    let lay = Layout::new(net);
    let mut sys = LinearSystem::new(lay.n_vars);
    let one = Rational::one();
    let neg = || -Rational::one();

    for (i, (lo, hi)) in input_box.iter().enumerate() {
        sys.push(&[(i, one.clone())], hi.clone(), false);
        sys.push(&[(i, neg())], -lo.clone(), false);
    }
    for r in &query.linear {
        sys.push(&sparse(&r.x, 0), r.rhs.clone(), r.strict);
    }
    for q in &query.quadratic {
        let (lo, hi) = &input_box[q.var];
        let mut push_line = |slope: Rational, shift: Rational| {
            let mut terms = sparse(&q.x, 0);
            terms.push((q.var, slope));
            sys.push(&terms, &q.rhs + shift, q.strict);
        };
        if q.square.is_positive() {
            for a in [lo, hi] {
                let two = Rational::from_integer(2.into());
                push_line(&two * &q.square * a, &q.square * a * a);
            }
        } else {
            push_line(&q.square * (lo + hi), &q.square * lo * hi);
        }
    }

    let layers = net.layers();
    for (l, &width) in lay.hidden.iter().enumerate() {
        let feed = lay.feeding(l);
        let layer = &layers[l];
        for j in 0..width {
            let (z, y) = (lay.z(l, j), lay.y(l, j));
            let w: Vec<(usize, Rational)> = feed.iter().zip(&layer.weights[j]).map(|(&v, c)| (v, c.clone())).collect();
            push_equality(&mut sys, z, &w, &layer.bias[j]);
            let (lo, hi) = &ibp.pre[l][j];
            sys.push(&[(z, one.clone())], hi.clone(), false);
            sys.push(&[(z, neg())], -lo.clone(), false);
            let zero = Rational::zero();
            match ibp.states[l][j] {
                NeuronState::Active => {
                    sys.push(&[(y, one.clone()), (z, neg())], zero.clone(), false);
                    sys.push(&[(z, one.clone()), (y, neg())], zero.clone(), false);
                    sys.push(&[(z, neg())], zero, false);
                }
                NeuronState::Inactive => {
                    sys.push(&[(y, one.clone())], zero.clone(), false);
                    sys.push(&[(y, neg())], zero.clone(), false);
                    sys.push(&[(z, one.clone())], zero, false);
                }
                NeuronState::Ambiguous => {
                    sys.push(&[(y, neg())], zero.clone(), false);
                    sys.push(&[(z, one.clone()), (y, neg())], zero, false);
                    sys.push(&[(y, hi - lo), (z, -hi.clone())], -(hi * lo), false);
                }
                NeuronState::Identity => {
                    sys.push(&[(y, one.clone()), (z, neg())], zero.clone(), false);
                    sys.push(&[(z, one.clone()), (y, neg())], zero.clone(), false);
                    sys.push(&[], zero, false);
                }
            }
            let (plo, phi) = &ibp.post[l][j];
            sys.push(&[(y, one.clone())], phi.clone(), false);
            sys.push(&[(y, neg())], -plo.clone(), false);
        }
    }

    let last = &layers[layers.len() - 1];
    let feed = lay.feeding(lay.hidden.len());
    for k in 0..lay.outputs {
        let w: Vec<(usize, Rational)> = feed.iter().zip(&last.weights[k]).map(|(&v, c)| (v, c.clone())).collect();
        push_equality(&mut sys, lay.out(k), &w, &last.bias[k]);
    }

    for r in &query.output {
        let mut terms = sparse(&r.x, 0);
        terms.extend(sparse(&r.y, lay.out(0)));
        sys.push(&terms, r.rhs.clone(), r.strict);
    }
    sys
}

fn sparse(coeffs: &[Rational], offset: usize) -> Vec<(usize, Rational)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (offset + i, c.clone()))
        .collect()
}

/// `target − w·v ≤ b` and `−target + w·v ≤ −b`.
fn push_equality(sys: &mut LinearSystem, target: usize, w: &[(usize, Rational)], b: &Rational) {
    let mut up = vec![(target, Rational::one())];
    up.extend(w.iter().map(|(v, c)| (*v, -c.clone())));
    sys.push(&up, b.clone(), false);
    let mut down = vec![(target, -Rational::one())];
    down.extend(w.iter().cloned());
    sys.push(&down, -b.clone(), false);
}

/// Row offsets of the blocks of a leaf system.
#[derive(Debug, Clone)]
pub struct RowIndex {
    pub input_box: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub property: usize,
    pub total: usize,
}

pub const ROWS_PER_NEURON: usize = 9;

impl RowIndex {
    pub fn new(net: &Network, query: &VerifyQuery) -> RowIndex {
        let lay = Layout::new(net);
        let relax: usize = query
            .quadratic
            .iter()
            .map(|q| if q.square.is_positive() { 2 } else { 1 })
            .sum();
        let mut next = 2 * lay.inputs + query.linear.len() + relax;
        let mut hidden = Vec::new();
        for &w in &lay.hidden {
            hidden.push(next);
            next += ROWS_PER_NEURON * w;
        }
        let outputs = next;
        let property = outputs + 2 * lay.outputs;
        RowIndex {
            input_box: 0,
            hidden,
            outputs,
            property,
            total: property + query.output.len(),
        }
    }
}

/// Tries to refute the node from interval bounds alone, one negated-property
/// row at a time: that row, output equalities to eliminate the outputs, and
/// post-activation (or input box) bounds for whatever remains.
pub fn interval_witness(net: &Network, query: &VerifyQuery, sys: &LinearSystem) -> Option<FarkasWitness> {
    let lay = Layout::new(net);
    let idx = RowIndex::new(net, query);
    let layers = net.layers();
    let last = &layers[layers.len() - 1];
    let n_hidden = lay.hidden.len();
    for (p, row) in query.output.iter().enumerate() {
        let mut lambda = vec![Rational::zero(); idx.total];
        lambda[idx.property + p] = Rational::one();
        let width = if n_hidden == 0 { lay.inputs } else { lay.hidden[n_hidden - 1] };
        let mut prev = vec![Rational::zero(); width];
        for (k, d) in row.y.iter().enumerate() {
            if d.is_zero() {
                continue;
            }
            // Row 2k is `o − W·prev ≤ b`, row 2k+1 is `−o + W·prev ≤ −b`.
            let r = idx.outputs + 2 * k + usize::from(d.is_positive());
            lambda[r] = d.abs();
            for (acc, w) in prev.iter_mut().zip(&last.weights[k]) {
                *acc += d * w;
            }
        }
        let mut xs = row.x.clone();
        if n_hidden == 0 {
            for (acc, v) in xs.iter_mut().zip(&prev) {
                *acc += v;
            }
        } else {
            let l = n_hidden - 1;
            for (j, e) in prev.iter().enumerate() {
                if e.is_zero() {
                    continue;
                }
                // Post-activation rows sit at offsets 7 (`y ≤ hi`) and 8 (`−y ≤ −lo`).
                let base = idx.hidden[l] + ROWS_PER_NEURON * j;
                let r = if e.is_positive() { base + 8 } else { base + 7 };
                lambda[r] = e.abs();
            }
        }
        for (i, g) in xs.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            let r = idx.input_box + 2 * i + usize::from(g.is_positive());
            lambda[r] = g.abs();
        }
        let w = FarkasWitness { multipliers: lambda };
        if w.check(sys).is_ok() {
            return Some(w);
        }
    }
    None
}
