//! Exact rational feasibility for systems of strict and non-strict linear
//! inequalities.
//!
//! A system `A x ≤ b, C x < d` is infeasible iff (Motzkin) there are
//! multipliers `λ ≥ 0` with `Σ λᵣ aᵣ = 0` such that `c = Σ λᵣ bᵣ` is
//! negative, or zero while some strict row carries a positive multiplier.
//! [`lp_feasible`] runs a single Phase-I simplex (Bland's rule) on that
//! alternative system. A feasible alternative is the infeasibility witness;
//! an infeasible one yields, through the final dual values, a point that
//! satisfies the original system (strict rows strictly).

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// `coeffs · v (< | ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
    pub strict: bool,
}

impl Row {
    pub fn holds(&self, v: &[Rational]) -> bool {
        let lhs = self.coeffs.iter().zip(v).fold(Rational::zero(), |acc, (a, x)| acc + a * x);
        if self.strict {
            lhs < self.rhs
        } else {
            lhs <= self.rhs
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearSystem {
    pub n_vars: usize,
    pub rows: Vec<Row>,
}

impl LinearSystem {
    pub fn new(n_vars: usize) -> Self {
        LinearSystem {
            n_vars,
            rows: Vec::new(),
        }
    }

    /// Adds `Σ coeff·v[idx] (< | ≤) rhs` from sparse terms.
    pub fn push(&mut self, terms: &[(usize, Rational)], rhs: Rational, strict: bool) {
        let mut coeffs = vec![Rational::zero(); self.n_vars];
        for (i, c) in terms {
            coeffs[*i] += c;
        }
        self.rows.push(Row { coeffs, rhs, strict });
    }

    pub fn satisfied_by(&self, v: &[Rational]) -> bool {
        v.len() == self.n_vars && self.rows.iter().all(|r| r.holds(v))
    }
}

/// One nonnegative multiplier per row of a leaf system.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasWitness {
    pub multipliers: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("witness has {got} multipliers for {expected} rows")]
    Length { expected: usize, got: usize },
    #[error("multiplier {0} is negative")]
    Negative(usize),
    #[error("combination leaves a nonzero coefficient on variable {0}")]
    NotCancelled(usize),
    #[error("derived inequality is not a contradiction")]
    NoContradiction,
}

impl FarkasWitness {
    /// Checks the witness against `sys` and returns the derived constant `c`
    /// of `0 ≤ c` (or `0 < c`).
    pub fn check(&self, sys: &LinearSystem) -> Result<Rational, WitnessError> {
        if self.multipliers.len() != sys.rows.len() {
            return Err(WitnessError::Length {
                expected: sys.rows.len(),
                got: self.multipliers.len(),
            });
        }
        if let Some(i) = self.multipliers.iter().position(|m| m.is_negative()) {
            return Err(WitnessError::Negative(i));
        }
        let mut combo = vec![Rational::zero(); sys.n_vars];
        let mut c = Rational::zero();
        let mut strict_used = false;
        for (m, row) in self.multipliers.iter().zip(&sys.rows) {
            if m.is_zero() {
                continue;
            }
            for (acc, a) in combo.iter_mut().zip(&row.coeffs) {
                *acc += m * a;
            }
            c += m * &row.rhs;
            strict_used |= row.strict;
        }
        if let Some(i) = combo.iter().position(|v| !v.is_zero()) {
            return Err(WitnessError::NotCancelled(i));
        }
        if c.is_negative() || (strict_used && c.is_zero()) {
            Ok(c)
        } else {
            Err(WitnessError::NoContradiction)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Feasible(Vec<Rational>),
    Infeasible(FarkasWitness),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("internal simplex error: {0}")]
pub struct LpError(pub String);

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    cost: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v /= &p;
            }
            self.rhs[r] /= &p;
        }
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][col].is_zero() {
                continue;
            }
            let f = self.rows[i][col].clone();
            for &j in &nz {
                let delta = &f * &prow[j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !self.cost[col].is_zero() {
            let f = self.cost[col].clone();
            for &j in &nz {
                let delta = &f * &prow[j];
                self.cost[j] -= delta;
            }
        }
        self.basis[r] = col;
    }
}

/// Decides `sys` exactly. The returned point or witness is rechecked before
/// it is handed out.
pub fn lp_feasible(sys: &LinearSystem) -> Result<LpOutcome, LpError> {
    let n = sys.n_vars;
    let m = sys.rows.len();
    let r_count = n + 2;
    let sigma = m;
    let art0 = m + 1;
    let width = m + 1 + r_count;

    let mut rows = vec![vec![Rational::zero(); width]; r_count];
    for (j, row) in sys.rows.iter().enumerate() {
        for (i, a) in row.coeffs.iter().enumerate() {
            if !a.is_zero() {
                rows[i][j] = a.clone();
            }
        }
        rows[n][j] = row.rhs.clone();
        if row.strict {
            rows[n + 1][j] = Rational::one();
        }
    }
    rows[n][sigma] = Rational::one();
    rows[n + 1][sigma] = Rational::one();
    let mut rhs = vec![Rational::zero(); r_count];
    rhs[n + 1] = Rational::one();
    for (i, row) in rows.iter_mut().enumerate() {
        row[art0 + i] = Rational::one();
    }
    let mut cost = vec![Rational::zero(); width];
    for j in 0..art0 {
        cost[j] = -rows.iter().fold(Rational::zero(), |acc, r| acc + &r[j]);
    }
    let mut t = Tableau {
        rows,
        rhs,
        cost,
        basis: (art0..art0 + r_count).collect(),
    };

    while let Some(col) = (0..art0).find(|&j| t.cost[j].is_negative()) {
        let mut best: Option<(usize, Rational)> = None;
        for i in 0..r_count {
            let a = &t.rows[i][col];
            if !a.is_positive() {
                continue;
            }
            let ratio = &t.rhs[i] / a;
            let better = match &best {
                None => true,
                Some((bi, br)) => ratio < *br || (ratio == *br && t.basis[i] < t.basis[*bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        let Some((r, _)) = best else {
            return Err(LpError("phase-one objective unbounded".into()));
        };
        t.pivot(r, col);
    }

    let objective = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(b, _)| **b >= art0)
        .fold(Rational::zero(), |acc, (_, v)| acc + v);

    if objective.is_zero() {
        let mut lambda = vec![Rational::zero(); m];
        for (b, v) in t.basis.iter().zip(&t.rhs) {
            if *b < m {
                lambda[*b] = v.clone();
            }
        }
        let w = FarkasWitness { multipliers: lambda };
        w.check(sys)
            .map_err(|e| LpError(format!("alternative solution is not a witness: {e}")))?;
        Ok(LpOutcome::Infeasible(w))
    } else {
        // Dual values of the phase-one problem: πᵢ = 1 − reduced cost of the
        // i-th artificial column.
        let pi: Vec<Rational> = (0..r_count).map(|i| Rational::one() - &t.cost[art0 + i]).collect();
        let s = -pi[n].clone();
        if !s.is_positive() {
            return Err(LpError("dual value of the combination row is not negative".into()));
        }
        let point: Vec<Rational> = pi[..n].iter().map(|v| v / &s).collect();
        if !sys.satisfied_by(&point) {
            return Err(LpError("dual point violates the system".into()));
        }
        Ok(LpOutcome::Feasible(point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn sys(n: usize, rows: &[(&[i64], i64, bool)]) -> LinearSystem {
        let mut s = LinearSystem::new(n);
        for (c, b, strict) in rows {
            s.rows.push(Row {
                coeffs: c.iter().map(|&v| int(v)).collect(),
                rhs: int(*b),
                strict: *strict,
            });
        }
        s
    }

    #[test]
    fn textbook_farkas_pair() {
        // x ≥ 1 and -x ≥ 0, written as -x ≤ -1 and x ≤ 0.
        let s = sys(1, &[(&[-1], -1, false), (&[1], 0, false)]);
        match lp_feasible(&s).unwrap() {
            LpOutcome::Infeasible(w) => {
                assert_eq!(w.multipliers, vec![int(1), int(1)]);
                assert_eq!(w.check(&s).unwrap(), int(-1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unit_interval_is_feasible() {
        let s = sys(1, &[(&[1], 1, false), (&[-1], 0, false)]);
        match lp_feasible(&s).unwrap() {
            LpOutcome::Feasible(p) => assert!(p[0] >= int(0) && p[0] <= int(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_boundary_cases() {
        // x ≤ 0 and x > 0: infeasible only because of strictness.
        let s = sys(1, &[(&[1], 0, false), (&[-1], 0, true)]);
        match lp_feasible(&s).unwrap() {
            LpOutcome::Infeasible(w) => assert_eq!(w.check(&s).unwrap(), int(0)),
            other => panic!("{other:?}"),
        }
        // x < 1 and x > 0: a strictly interior point is required.
        let s = sys(1, &[(&[1], 1, true), (&[-1], 0, true)]);
        match lp_feasible(&s).unwrap() {
            LpOutcome::Feasible(p) => assert!(p[0] > int(0) && p[0] < int(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_system_and_zero_rows() {
        assert!(matches!(lp_feasible(&LinearSystem::new(2)).unwrap(), LpOutcome::Feasible(_)));
        let s = sys(1, &[(&[0], -1, false)]);
        assert!(matches!(lp_feasible(&s).unwrap(), LpOutcome::Infeasible(_)));
        let s = sys(1, &[(&[0], 0, true)]);
        assert!(matches!(lp_feasible(&s).unwrap(), LpOutcome::Infeasible(_)));
    }

    #[test]
    fn witness_errors() {
        let s = sys(1, &[(&[-1], -1, false), (&[1], 0, false)]);
        let bad = FarkasWitness {
            multipliers: vec![int(1)],
        };
        assert!(matches!(bad.check(&s), Err(WitnessError::Length { .. })));
        let neg = FarkasWitness {
            multipliers: vec![int(-1), int(-1)],
        };
        assert_eq!(neg.check(&s), Err(WitnessError::Negative(0)));
        let skew = FarkasWitness {
            multipliers: vec![int(1), ratio(1, 2)],
        };
        assert_eq!(skew.check(&s), Err(WitnessError::NotCancelled(0)));
        let zero = FarkasWitness {
            multipliers: vec![int(0), int(0)],
        };
        assert_eq!(zero.check(&s), Err(WitnessError::NoContradiction));
    }
}
