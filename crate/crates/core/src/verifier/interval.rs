//! Interval bound propagation and the linear relaxations built on it.

use crate::network::{Activation, Network};
use crate::rational::Rational;
use num_traits::{Signed, Zero};

/// A fixed ReLU phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Active,
    Inactive,
}

/// How a hidden neuron is encoded in a leaf system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeuronState {
    Active,
    Inactive,
    Ambiguous,
    Identity,
}

/// Per-layer pre-activation intervals (the last layer is the output), plus
/// post-activation intervals and encoding states for the hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBox {
    pub pre: Vec<Vec<(Rational, Rational)>>,
    pub post: Vec<Vec<(Rational, Rational)>>,
    pub states: Vec<Vec<NeuronState>>,
}

impl IntervalBox {
    pub fn output(&self) -> &[(Rational, Rational)] {
        self.pre.last().expect("at least one layer")
    }
}

/// Phase assignments for hidden neurons, indexed `[layer][neuron]`.
pub type Phases = Vec<Vec<Option<Phase>>>;

pub fn no_phases(net: &Network) -> Phases {
    net.hidden_widths().iter().map(|&w| vec![None; w]).collect()
}

/// Sound pre-activation bounds for every `x` in `input_box`.
pub fn interval_propagate(net: &Network, input_box: &[(Rational, Rational)]) -> IntervalBox {
    interval_propagate_with(net, input_box, &no_phases(net))
}

/// IBP where fixed phases select the activation encoding. An active phase
/// maps `[lo, hi]` to `[max(lo,0), max(hi,0)]`, an inactive one to `[0,0]`.
pub fn interval_propagate_with(net: &Network, input_box: &[(Rational, Rational)], phases: &Phases) -> IntervalBox {
    let zero = Rational::zero();
    let mut cur: Vec<(Rational, Rational)> = input_box.to_vec();
    let mut out = IntervalBox {
        pre: Vec::new(),
        post: Vec::new(),
        states: Vec::new(),
    };
    let last = net.layers().len() - 1;
    for (l, layer) in net.layers().iter().enumerate() {
        let pre: Vec<(Rational, Rational)> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| {
                let mut lo = b.clone();
                let mut hi = b.clone();
                for (w, (xl, xh)) in row.iter().zip(&cur) {
                    if w.is_positive() {
                        lo += w * xl;
                        hi += w * xh;
                    } else if w.is_negative() {
                        lo += w * xh;
                        hi += w * xl;
                    }
                }
                (lo, hi)
            })
            .collect();
        if l == last {
            out.pre.push(pre);
            break;
        }
        let mut post = Vec::with_capacity(pre.len());
        let mut states = Vec::with_capacity(pre.len());
        for (j, (lo, hi)) in pre.iter().enumerate() {
            let state = neuron_state(layer.activation, phases[l][j], lo, hi);
            let bounds = match state {
                NeuronState::Identity => (lo.clone(), hi.clone()),
                NeuronState::Active => (lo.max(&zero).clone(), hi.max(&zero).clone()),
                NeuronState::Inactive => (zero.clone(), zero.clone()),
                NeuronState::Ambiguous => (zero.clone(), hi.clone()),
            };
            post.push(bounds);
            states.push(state);
        }
        out.pre.push(pre);
        cur = post.clone();
        out.post.push(post);
        out.states.push(states);
    }
    out
}

/// Splits win; otherwise `lo ≥ 0` is active, `hi ≤ 0` inactive.
pub fn neuron_state(act: Activation, phase: Option<Phase>, lo: &Rational, hi: &Rational) -> NeuronState {
    match (act, phase) {
        (Activation::Identity, _) => NeuronState::Identity,
        (Activation::Relu, Some(Phase::Active)) => NeuronState::Active,
        (Activation::Relu, Some(Phase::Inactive)) => NeuronState::Inactive,
        (Activation::Relu, None) if !lo.is_negative() => NeuronState::Active,
        (Activation::Relu, None) if !hi.is_positive() => NeuronState::Inactive,
        (Activation::Relu, None) => NeuronState::Ambiguous,
    }
}

/// A linear function `slope·v + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFn {
    pub slope: Rational,
    pub intercept: Rational,
}

impl LinearFn {
    pub fn at(&self, v: &Rational) -> Rational {
        &self.slope * v + &self.intercept
    }
}

/// Bounds on `v²` over `[lo, hi]`: the secant above, and the tangents at
/// both endpoints below.
pub fn relax_quadratic(lo: &Rational, hi: &Rational) -> (LinearFn, [LinearFn; 2]) {
    let upper = LinearFn {
        slope: lo + hi,
        intercept: -(lo * hi),
    };
    let tangent = |a: &Rational| LinearFn {
        slope: a * Rational::from_integer(2.into()),
        intercept: -(a * a),
    };
    (upper, [tangent(lo), tangent(hi)])
}

/// Upper edge of the triangle relaxation of `relu` on `[lo, hi]` with
/// `lo < 0 < hi`: `y ≤ hi·(z − lo)/(hi − lo)`.
pub fn triangle_upper(lo: &Rational, hi: &Rational) -> LinearFn {
    let slope = hi / (hi - lo);
    LinearFn {
        intercept: -(&slope * lo),
        slope,
    }
}
