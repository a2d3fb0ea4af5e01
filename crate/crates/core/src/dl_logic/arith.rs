//! Arithmetic back ends for loss evaluation: plain `f64`, exact rationals,
//! and a reverse-mode tape.
//!
//! Every back end follows the same subgradient convention: `max`/`min` take
//! the first argument's branch on ties. The float and tape back ends record
//! each branch decision so callers can detect when a perturbation crosses
//! a kink.

use super::LogicError;
use crate::rational::{to_f64, Rational};
use num_traits::{One, Signed, Zero};

pub trait Arith {
    type V: Clone;

    fn konst(&mut self, q: &Rational) -> Self::V;
    /// Network parameter `i` in canonical order.
    fn param(&mut self, i: usize) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn scale(&mut self, a: &Self::V, q: &Rational) -> Self::V;
    fn max(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn min(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn is_zero(&self, a: &Self::V) -> bool;
    /// `(mean vᵢ^p)^(1/p)` over non-negative values.
    fn power_mean(&mut self, vals: &[Self::V], p: f64) -> Result<Self::V, LogicError>;
    /// Records a data-dependent decision taken outside `max`/`min`.
    fn branch(&mut self, _taken: bool) {}
}

/// Value and partial derivatives of the power mean. Returns `None` for the
/// partials on the degenerate (zero) branch, which is recorded as a kink.
pub(crate) fn power_mean_f64(vals: &[f64], p: f64) -> (f64, Option<Vec<f64>>) {
    let n = vals.len() as f64;
    if p < 0.0 && vals.contains(&0.0) {
        return (0.0, None);
    }
    if p == 1.0 {
        return (vals.iter().sum::<f64>() / n, Some(vec![1.0 / n; vals.len()]));
    }
    let s = vals.iter().map(|v| v.powf(p)).sum::<f64>() / n;
    let m = s.powf(1.0 / p);
    if m == 0.0 {
        return (0.0, None);
    }
    let partials = vals
        .iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                v.powf(p - 1.0) * m.powf(1.0 - p) / n
            }
        })
        .collect();
    (m, Some(partials))
}

pub struct FloatArith<'a> {
    params: &'a [f64],
    pub signature: Vec<bool>,
}

impl<'a> FloatArith<'a> {
    pub fn new(params: &'a [f64]) -> Self {
        FloatArith {
            params,
            signature: Vec::new(),
        }
    }
}

impl Arith for FloatArith<'_> {
    type V = f64;

    fn konst(&mut self, q: &Rational) -> f64 {
        to_f64(q)
    }

    fn param(&mut self, i: usize) -> f64 {
        self.params[i]
    }

    fn add(&mut self, a: &f64, b: &f64) -> f64 {
        a + b
    }

    fn sub(&mut self, a: &f64, b: &f64) -> f64 {
        a - b
    }

    fn mul(&mut self, a: &f64, b: &f64) -> f64 {
        a * b
    }

    fn scale(&mut self, a: &f64, q: &Rational) -> f64 {
        a * to_f64(q)
    }

    fn max(&mut self, a: &f64, b: &f64) -> f64 {
        let first = a >= b;
        self.signature.push(first);
        if first {
            *a
        } else {
            *b
        }
    }

    fn min(&mut self, a: &f64, b: &f64) -> f64 {
        let first = a <= b;
        self.signature.push(first);
        if first {
            *a
        } else {
            *b
        }
    }

    fn is_zero(&self, a: &f64) -> bool {
        *a == 0.0
    }

    fn power_mean(&mut self, vals: &[f64], p: f64) -> Result<f64, LogicError> {
        let (m, partials) = power_mean_f64(vals, p);
        self.signature.push(partials.is_some());
        Ok(m)
    }

    fn branch(&mut self, taken: bool) {
        self.signature.push(taken);
    }
}

/// Exact rational back end. Power means are limited to `p = ±1`.
pub struct ExactArith<'a> {
    params: &'a [Rational],
}

impl<'a> ExactArith<'a> {
    pub fn new(params: &'a [Rational]) -> Self {
        ExactArith { params }
    }
}

impl Arith for ExactArith<'_> {
    type V = Rational;

    fn konst(&mut self, q: &Rational) -> Rational {
        q.clone()
    }

    fn param(&mut self, i: usize) -> Rational {
        self.params[i].clone()
    }

    fn add(&mut self, a: &Rational, b: &Rational) -> Rational {
        a + b
    }

    fn sub(&mut self, a: &Rational, b: &Rational) -> Rational {
        a - b
    }

    fn mul(&mut self, a: &Rational, b: &Rational) -> Rational {
        a * b
    }

    fn scale(&mut self, a: &Rational, q: &Rational) -> Rational {
        a * q
    }

    fn max(&mut self, a: &Rational, b: &Rational) -> Rational {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn min(&mut self, a: &Rational, b: &Rational) -> Rational {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn is_zero(&self, a: &Rational) -> bool {
        a.is_zero()
    }

    fn power_mean(&mut self, vals: &[Rational], p: f64) -> Result<Rational, LogicError> {
        let n = Rational::from_integer(vals.len().into());
        if p == 1.0 {
            Ok(vals.iter().fold(Rational::zero(), |acc, v| acc + v) / n)
        } else if p == -1.0 {
            if vals.iter().any(|v| v.is_zero()) {
                return Ok(Rational::zero());
            }
            if vals.iter().any(|v| v.is_negative()) {
                return Err(LogicError::Domain("power mean of a negative value".into()));
            }
            let inv = vals.iter().fold(Rational::zero(), |acc, v| acc + Rational::one() / v);
            Ok(n / inv)
        } else {
            Err(LogicError::Unsupported {
                message: format!("exact evaluation supports power means with p = ±1 only, got {p}"),
                span: Default::default(),
            })
        }
    }
}

/// Reverse-mode tape. Values are node indices; the first `n_params` nodes
/// are the parameter leaves.
pub struct Tape {
    values: Vec<f64>,
    edges: Vec<(u32, f64)>,
    starts: Vec<u32>,
    n_params: usize,
    pub signature: Vec<bool>,
}

impl Tape {
    pub fn new(params: &[f64]) -> Self {
        let mut t = Tape {
            values: Vec::with_capacity(4096),
            edges: Vec::with_capacity(8192),
            starts: Vec::with_capacity(4096),
            n_params: params.len(),
            signature: Vec::new(),
        };
        for &p in params {
            t.push(p, &[]);
        }
        t
    }

    fn push(&mut self, value: f64, parents: &[(usize, f64)]) -> usize {
        self.starts.push(self.edges.len() as u32);
        self.edges.extend(parents.iter().map(|&(i, w)| (i as u32, w)));
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Gradient of `node` with respect to every parameter.
    pub fn gradient(&self, node: usize) -> Vec<f64> {
        let mut adj = vec![0.0; node + 1];
        adj[node] = 1.0;
        for i in (0..=node).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let end = self.starts.get(i + 1).map_or(self.edges.len(), |&e| e as usize);
            for &(p, w) in &self.edges[self.starts[i] as usize..end] {
                adj[p as usize] += a * w;
            }
        }
        adj.truncate(self.n_params);
        adj.resize(self.n_params, 0.0);
        adj
    }
}

impl Arith for Tape {
    type V = usize;

    fn konst(&mut self, q: &Rational) -> usize {
        self.push(to_f64(q), &[])
    }

    fn param(&mut self, i: usize) -> usize {
        i
    }

    fn add(&mut self, a: &usize, b: &usize) -> usize {
        let v = self.values[*a] + self.values[*b];
        self.push(v, &[(*a, 1.0), (*b, 1.0)])
    }

    fn sub(&mut self, a: &usize, b: &usize) -> usize {
        let v = self.values[*a] - self.values[*b];
        self.push(v, &[(*a, 1.0), (*b, -1.0)])
    }

    fn mul(&mut self, a: &usize, b: &usize) -> usize {
        let (x, y) = (self.values[*a], self.values[*b]);
        self.push(x * y, &[(*a, y), (*b, x)])
    }

    fn scale(&mut self, a: &usize, q: &Rational) -> usize {
        let c = to_f64(q);
        let v = self.values[*a] * c;
        self.push(v, &[(*a, c)])
    }

    fn max(&mut self, a: &usize, b: &usize) -> usize {
        let first = self.values[*a] >= self.values[*b];
        self.signature.push(first);
        let pick = if first { *a } else { *b };
        let v = self.values[pick];
        self.push(v, &[(pick, 1.0)])
    }

    fn min(&mut self, a: &usize, b: &usize) -> usize {
        let first = self.values[*a] <= self.values[*b];
        self.signature.push(first);
        let pick = if first { *a } else { *b };
        let v = self.values[pick];
        self.push(v, &[(pick, 1.0)])
    }

    fn is_zero(&self, a: &usize) -> bool {
        self.values[*a] == 0.0
    }

    fn power_mean(&mut self, vals: &[usize], p: f64) -> Result<usize, LogicError> {
        let xs: Vec<f64> = vals.iter().map(|&i| self.values[i]).collect();
        let (m, partials) = power_mean_f64(&xs, p);
        self.signature.push(partials.is_some());
        let parents: Vec<(usize, f64)> = match partials {
            Some(ps) => vals.iter().copied().zip(ps).collect(),
            None => Vec::new(),
        };
        Ok(self.push(m, &parents))
    }

    fn branch(&mut self, taken: bool) {
        self.signature.push(taken);
    }
}
