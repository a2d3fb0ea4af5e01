//! Reference procedures that share no code with the verifier: exhaustive
//! ReLU phase enumeration decided by Fourier–Motzkin elimination, and an
//! exact fixed-point evaluator for networks with dyadic parameters.

use nspc_core::network::{Activation, Network};
use nspc_core::rational::Rational;
use nspc_core::verifier::VerifyQuery;
use num_traits::{Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// `a · x (< | ≤) b`.
#[derive(Clone, Debug)]
struct FmRow {
    a: Vec<Rational>,
    b: Rational,
    strict: bool,
}

/// Decides feasibility of a system of strict and non-strict inequalities
/// over the rationals by eliminating one variable at a time.
fn fm_feasible(mut rows: Vec<FmRow>, n: usize) -> bool {
    for v in 0..n {
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            match r.a[v].cmp(&Rational::zero()) {
                Ordering::Greater => pos.push(r),
                Ordering::Less => neg.push(r),
                Ordering::Equal => rest.push(r),
            }
        }
        for p in &pos {
            for q in &neg {
                let sp = Rational::from_integer(1.into()) / &p.a[v];
                let sq = Rational::from_integer(1.into()) / -&q.a[v];
                let a = p.a.iter().zip(&q.a).map(|(x, y)| x * &sp + y * &sq).collect();
                rest.push(FmRow {
                    a,
                    b: &p.b * &sp + &q.b * &sq,
                    strict: p.strict || q.strict,
                });
            }
        }
        rows = rest;
    }
    rows.iter().all(|r| {
        if r.strict {
            r.b.is_positive()
        } else {
            !r.b.is_negative()
        }
    })
}

/// Affine function of the network input: `coeffs · x + constant`.
#[derive(Clone)]
struct Affine {
    coeffs: Vec<Rational>,
    constant: Rational,
}

/// Whether some input satisfies every constraint of `q`, found by trying
/// every assignment of phases to the hidden ReLU neurons. For a fixed
/// assignment the network is affine and the question is a linear
/// feasibility problem.
pub fn has_violation(net: &Network, q: &VerifyQuery) -> bool {
    let n = net.input_dim();
    assert!(q.quadratic.is_empty(), "the oracle handles linear queries only");
    let relus: usize = net
        .layers()
        .iter()
        .take(net.layers().len() - 1)
        .filter(|l| l.activation == Activation::Relu)
        .map(|l| l.outputs())
        .sum();
    assert!(relus <= 16, "phase enumeration is exponential");

    let mut base = Vec::new();
    for (i, (lo, hi)) in q.bounds.iter().enumerate() {
        let mut e = vec![Rational::zero(); n];
        e[i] = Rational::from_integer(1.into());
        base.push(FmRow {
            a: e.clone(),
            b: hi.clone(),
            strict: false,
        });
        base.push(FmRow {
            a: e.iter().map(|c| -c).collect(),
            b: -lo,
            strict: false,
        });
    }
    for r in &q.linear {
        base.push(FmRow {
            a: r.x.clone(),
            b: r.rhs.clone(),
            strict: r.strict,
        });
    }

    for mask in 0u32..(1 << relus) {
        let mut rows = base.clone();
        let mut cur: Vec<Affine> = (0..n)
            .map(|i| {
                let mut coeffs = vec![Rational::zero(); n];
                coeffs[i] = Rational::from_integer(1.into());
                Affine {
                    coeffs,
                    constant: Rational::zero(),
                }
            })
            .collect();
        let mut bit = 0;
        let last = net.layers().len() - 1;
        for (l, layer) in net.layers().iter().enumerate() {
            let pre: Vec<Affine> = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(w, b)| {
                    let mut acc = Affine {
                        coeffs: vec![Rational::zero(); n],
                        constant: b.clone(),
                    };
                    for (wi, v) in w.iter().zip(&cur) {
                        for (c, vc) in acc.coeffs.iter_mut().zip(&v.coeffs) {
                            *c += wi * vc;
                        }
                        acc.constant += wi * &v.constant;
                    }
                    acc
                })
                .collect();
            if l == last || layer.activation == Activation::Identity {
                cur = pre;
                continue;
            }
            cur = pre
                .into_iter()
                .map(|z| {
                    let active = mask >> bit & 1 == 1;
                    bit += 1;
                    if active {
                        // z ≥ 0
                        rows.push(FmRow {
                            a: z.coeffs.iter().map(|c| -c).collect(),
                            b: z.constant.clone(),
                            strict: false,
                        });
                        z
                    } else {
                        // z ≤ 0
                        rows.push(FmRow {
                            a: z.coeffs.clone(),
                            b: -&z.constant,
                            strict: false,
                        });
                        Affine {
                            coeffs: vec![Rational::zero(); n],
                            constant: Rational::zero(),
                        }
                    }
                })
                .collect();
        }
        for r in &q.output {
            let mut a = r.x.clone();
            let mut b = r.rhs.clone();
            for (d, y) in r.y.iter().zip(&cur) {
                for (ai, yc) in a.iter_mut().zip(&y.coeffs) {
                    *ai += d * yc;
                }
                b -= d * &y.constant;
            }
            rows.push(FmRow { a, b, strict: r.strict });
        }
        if fm_feasible(rows, n) {
            return true;
        }
    }
    false
}

/// `num / 2^exp`, exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub num: i128,
    pub exp: u32,
}

impl Dyadic {
    pub fn from_rational(q: &Rational) -> Option<Dyadic> {
        let d = q.denom().to_u128()?;
        if !d.is_power_of_two() {
            return None;
        }
        Some(Dyadic {
            num: q.numer().to_i128()?,
            exp: d.trailing_zeros(),
        })
    }

    pub fn to_rational(self) -> Rational {
        Rational::new(self.num.into(), (1i128 << self.exp).into())
    }

    fn at(self, exp: u32) -> i128 {
        assert!(exp >= self.exp);
        self.num.checked_mul(1i128 << (exp - self.exp)).expect("fixed-point overflow")
    }

    pub fn add(self, o: Dyadic) -> Dyadic {
        let exp = self.exp.max(o.exp);
        Dyadic {
            num: self.at(exp) + o.at(exp),
            exp,
        }
    }

    pub fn mul(self, o: Dyadic) -> Dyadic {
        Dyadic {
            num: self.num.checked_mul(o.num).expect("fixed-point overflow"),
            exp: self.exp + o.exp,
        }
    }

    pub fn compare(self, o: Dyadic) -> Ordering {
        let exp = self.exp.max(o.exp);
        self.at(exp).cmp(&o.at(exp))
    }
}

/// A network whose parameters are all dyadic, evaluated in `i128`.
pub struct DyadicNet {
    layers: Vec<(Vec<Vec<Dyadic>>, Vec<Dyadic>, bool)>,
}

impl DyadicNet {
    pub fn new(net: &Network) -> Option<DyadicNet> {
        let last = net.layers().len() - 1;
        let layers = net
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let w = layer
                    .weights
                    .iter()
                    .map(|row| row.iter().map(Dyadic::from_rational).collect::<Option<Vec<_>>>())
                    .collect::<Option<Vec<_>>>()?;
                let b = layer.bias.iter().map(Dyadic::from_rational).collect::<Option<Vec<_>>>()?;
                Some((w, b, l != last && layer.activation == Activation::Relu))
            })
            .collect::<Option<Vec<_>>>()?;
        Some(DyadicNet { layers })
    }

    pub fn eval(&self, x: &[Dyadic]) -> Vec<Dyadic> {
        let mut cur = x.to_vec();
        for (w, b, relu) in &self.layers {
            cur = w
                .iter()
                .zip(b)
                .map(|(row, bj)| {
                    let z = row.iter().zip(&cur).fold(*bj, |acc, (wi, xi)| acc.add(wi.mul(*xi)));
                    if *relu && z.num < 0 {
                        Dyadic { num: 0, exp: 0 }
                    } else {
                        z
                    }
                })
                .collect();
        }
        cur
    }
}

/// `coeffs · v (< | ≤) rhs` with dyadic data.
pub fn row_holds(coeffs: &[Rational], v: &[Dyadic], strict: bool, rhs: &Rational) -> bool {
    let lhs = coeffs.iter().zip(v).fold(Dyadic { num: 0, exp: 0 }, |acc, (c, x)| {
        acc.add(Dyadic::from_rational(c).expect("dyadic coefficient").mul(*x))
    });
    let ord = lhs.compare(Dyadic::from_rational(rhs).expect("dyadic right-hand side"));
    ord == Ordering::Less || (!strict && ord == Ordering::Equal)
}

/// Exact violation test of `q` at `x` using [`DyadicNet`].
pub fn dyadic_violation(net: &DyadicNet, q: &VerifyQuery, x: &[Dyadic]) -> bool {
    let y = net.eval(x);
    let xy: Vec<Dyadic> = x.iter().chain(&y).copied().collect();
    q.output.iter().all(|r| {
        let coeffs: Vec<Rational> = r.x.iter().chain(&r.y).cloned().collect();
        row_holds(&coeffs, &xy, r.strict, &r.rhs)
    })
}
