//! Closed-loop simulation of the two-car system and the lemma ledger.
//!
//! The state is the relative position `p_rel` and velocity `v_rel` of the
//! controlled car with respect to the car ahead, with dynamics
//! `p' = v`, `v' = -a`. A negative `v_rel` means the gap is closing, so
//! braking at `a_rel = -B` makes `v_rel` grow. The controller is sampled
//! every `Δc`; in between, `a_rel` is constant and the dynamics are
//! integrated in closed form, so trajectories are exact rationals.

mod bridge;
mod ledger;

pub use bridge::{check_embedding_bridge, BridgeCheck, BridgeReport};
pub use ledger::{assemble_ledger, LemmaLedger, Obligation, SweepReport, Violation, OVERALL_DISCHARGED, OVERALL_NOT_DISCHARGED};

use crate::network::{EmbeddingSpec, Network, NetworkError};
use crate::rational::{format_rational, int, to_f64, Rational};
use num_traits::{Signed, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("no initial state satisfying the precondition found after {0} attempts")]
    SamplingExhausted(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Braking constant `B > 0`.
    pub braking: Rational,
    /// Control period `Δc`.
    pub control_period: Rational,
    /// Integration step `Δt ≤ Δc`.
    pub step: Rational,
    pub horizon: Rational,
    pub p0: Rational,
    pub v0: Rational,
    /// Controller input domain for `v_rel`; inputs outside are clamped.
    pub v_range: (Rational, Rational),
    /// Controller input domain for `p_rel`.
    pub p_range: (Rational, Rational),
    /// Hold `v_rel` at zero instead of letting braking reverse it. Off by
    /// default (the modelled dynamics have no such clamp).
    pub stop_braking_at_zero: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            braking: int(1),
            control_period: Rational::new(1.into(), 10.into()),
            step: Rational::new(1.into(), 100.into()),
            horizon: int(10),
            p0: int(10),
            v0: int(-2),
            v_range: (int(-5), int(5)),
            p_range: (int(0), int(10)),
            stop_braking_at_zero: false,
        }
    }
}

/// `p > v² / (2B)`.
pub fn precondition(braking: &Rational, p: &Rational, v: &Rational) -> bool {
    *p > v * v / (braking * int(2))
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !self.braking.is_positive() {
            return bad("braking constant B must be positive");
        }
        if !(self.step.is_positive() && self.step <= self.control_period && self.control_period <= self.horizon) {
            return bad("need 0 < step <= control_period <= horizon");
        }
        if self.v_range.0 > self.v_range.1 || self.p_range.0 > self.p_range.1 {
            return bad("empty controller input domain");
        }
        if !precondition(&self.braking, &self.p0, &self.v0) {
            return bad("initial state violates the precondition p_rel > v_rel^2 / (2B)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: Rational,
    pub p_rel: Rational,
    pub v_rel: Rational,
    /// Control in effect from this state to the next.
    pub a_rel: Rational,
    /// The controller input was clamped into its domain at this state.
    pub clamped: bool,
}

/// The control law closing the loop.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// `a_rel = u(f(e(v_rel, p_rel)))`.
    Neural { net: &'a Network, emb: &'a EmbeddingSpec },
    /// A fixed acceleration, bypassing any network.
    Constant(&'a Rational),
}

impl Controller<'_> {
    /// Acceleration at `(v, p)` and whether the input had to be clamped.
    pub fn control(&self, v: &Rational, p: &Rational, cfg: &SimConfig) -> Result<(Rational, bool), SimError> {
        match self {
            Controller::Constant(a) => Ok(((*a).clone(), false)),
            Controller::Neural { net, emb } => {
                let clamp = |x: &Rational, (lo, hi): &(Rational, Rational)| x.clamp(lo, hi).clone();
                let cv = clamp(v, &cfg.v_range);
                let cp = clamp(p, &cfg.p_range);
                let clamped = cv != *v || cp != *p;
                let out = emb.unembed(&net.eval_exact(&emb.embed(&[cv, cp])?)?)?;
                Ok((out[0].clone(), clamped))
            }
        }
    }
}

/// Simulates from `(cfg.p0, cfg.v0)` over `[0, T]` in steps of `Δt`,
/// recomputing the control at `t = 0, Δc, 2Δc, …`.
pub fn simulate(ctrl: Controller<'_>, cfg: &SimConfig) -> Result<Vec<SimState>, SimError> {
    cfg.validate()?;
    let steps = (&cfg.horizon / &cfg.step).floor().to_integer();
    let steps: usize = steps
        .try_into()
        .map_err(|_| SimError::InvalidConfig("too many integration steps".into()))?;
    let half = Rational::new(1.into(), 2.into());
    let (mut p, mut v) = (cfg.p0.clone(), cfg.v0.clone());
    let mut next_control = Rational::zero();
    let mut a = Rational::zero();
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = &cfg.step * int(k as i64);
        let mut clamped = false;
        if k < steps && t >= next_control {
            (a, clamped) = ctrl.control(&v, &p, cfg)?;
            next_control += &cfg.control_period;
        }
        let held = cfg.stop_braking_at_zero && !v.is_negative() && a.is_negative();
        let a_eff = if held { Rational::zero() } else { a.clone() };
        out.push(SimState {
            t: t.clone(),
            p_rel: p.clone(),
            v_rel: v.clone(),
            a_rel: a_eff.clone(),
            clamped,
        });
        if k == steps {
            break;
        }
        let dt = &cfg.step;
        let mut v_next = &v - &a_eff * dt;
        let mut p_next = &p + &v * dt - &half * &a_eff * dt * dt;
        if cfg.stop_braking_at_zero && v.is_negative() && v_next.is_positive() {
            // v reaches zero inside the step: integrate up to that instant,
            // then hold.
            let t_stop = &v / &a_eff;
            p_next = &p + &v * &t_stop - &half * &a_eff * &t_stop * &t_stop;
            v_next = Rational::zero();
        }
        p = p_next;
        v = v_next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Postcondition {
    pub holds: bool,
    pub min_p: Rational,
    pub argmin_t: Rational,
}

/// `p_rel > 0` at every state; the minimum is taken over the sampled
/// states (for constant acceleration the continuous minimum lies at a
/// state whenever the turning point is on the step grid).
pub fn check_postcondition(traj: &[SimState]) -> Option<Postcondition> {
    let first = traj.first()?;
    let mut best = first;
    for s in traj {
        if s.p_rel < best.p_rel {
            best = s;
        }
    }
    Some(Postcondition {
        holds: best.p_rel.is_positive(),
        min_p: best.p_rel.clone(),
        argmin_t: best.t.clone(),
    })
}

/// CSV with header `t,p_rel,v_rel,a_rel,clamped`; values are decimal
/// approximations of the exact states.
pub fn trajectory_csv(traj: &[SimState]) -> String {
    let mut s = String::from("t,p_rel,v_rel,a_rel,clamped\n");
    for st in traj {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            format_rational(&st.t),
            to_f64(&st.p_rel),
            to_f64(&st.v_rel),
            to_f64(&st.a_rel),
            st.clamped
        );
    }
    s
}

/// Initial states `(p0, v0)` drawn uniformly from the controller domain and
/// filtered by the precondition.
pub fn sample_initial_states(cfg: &SimConfig, n: usize, seed: u64) -> Result<Vec<(Rational, Rational)>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let denom = Rational::from_integer((1u64 << 32).into());
    let mut draw = |(lo, hi): &(Rational, Rational)| lo + (hi - lo) * Rational::from_integer(rng.next_u32().into()) / &denom;
    let mut out = Vec::with_capacity(n);
    let limit = n.saturating_mul(100).max(100);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == limit {
            return Err(SimError::SamplingExhausted(attempts));
        }
        attempts += 1;
        let v = draw(&cfg.v_range);
        let p = draw(&cfg.p_range);
        if precondition(&cfg.braking, &p, &v) {
            out.push((p, v));
        }
    }
    Ok(out)
}

/// Runs one simulation per sampled initial state and records every run
/// whose postcondition fails.
pub fn falsification_sweep(ctrl: Controller<'_>, cfg: &SimConfig, n: usize, seed: u64) -> Result<SweepReport, SimError> {
    let mut violations = Vec::new();
    for (p0, v0) in sample_initial_states(cfg, n, seed)? {
        let run_cfg = SimConfig {
            p0: p0.clone(),
            v0: v0.clone(),
            ..cfg.clone()
        };
        let traj = simulate(ctrl, &run_cfg)?;
        let post = check_postcondition(&traj).expect("trajectories are nonempty");
        if !post.holds {
            violations.push(Violation {
                p0: format_rational(&p0),
                v0: format_rational(&v0),
                min_p: format_rational(&post.min_p),
                at_t: format_rational(&post.argmin_t),
            });
        }
    }
    Ok(SweepReport {
        runs: n,
        seed,
        violations,
    })
}
