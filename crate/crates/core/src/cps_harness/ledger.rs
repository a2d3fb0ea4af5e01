//! The lemma ledger: status of the three proof obligations of the car
//! example.
//!
//! 1. the network property, discharged by an accepted certificate;
//! 2. the solution property, discharged by the embedding bridge;
//! 3. the program property, for which only falsification evidence is
//!    collected here (simulation is testing, not proof).

use super::BridgeReport;
use serde::Serialize;
use std::fmt::Write;

pub const OVERALL_DISCHARGED: &str = "discharged-at-desk-scale";
pub const OVERALL_NOT_DISCHARGED: &str = "not-discharged";
const NON_PROOF: &str = "obligation 3 is checked by simulation only; \
    this is falsification evidence, not a proof of the closed-loop property";
const SIGN_CONVENTION: &str = "sign convention: v_rel < 0 means the gap is closing; \
    a_rel = -B makes v_rel grow";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub p0: String,
    pub v0: String,
    pub min_p: String,
    pub at_t: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub runs: usize,
    pub seed: u64,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Obligation {
    pub status: String,
    pub discharged: bool,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaLedger {
    pub obligation1: Obligation,
    pub obligation2: Obligation,
    pub obligation3: Obligation,
    pub bridge: BridgeReport,
    pub sweep: Option<SweepReport>,
    pub overall: String,
    pub notes: Vec<String>,
}

/// Combines the three pieces of evidence. `certificate` is the certificate
/// path and whether the independent checker accepted it (`None` when no
/// certificate exists, e.g. after a counterexample).
pub fn assemble_ledger(
    certificate: Option<(&str, bool)>,
    bridge: Option<&BridgeReport>,
    sweep: Option<&SweepReport>,
) -> LemmaLedger {
    let obligation1 = match certificate {
        Some((path, true)) => Obligation {
            status: "discharged".into(),
            discharged: true,
            evidence: format!("certificate {path} accepted by the independent checker"),
        },
        Some((path, false)) => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: format!("certificate {path} rejected by the independent checker"),
        },
        None => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: "no certificate (network property not proven)".into(),
        },
    };
    let obligation2 = match bridge {
        Some(b) if b.all_pass() => Obligation {
            status: "discharged".into(),
            discharged: true,
            evidence: format!("all {} bridge checks pass", b.checks.len()),
        },
        Some(b) => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: format!(
                "{} of {} bridge checks fail",
                b.checks.iter().filter(|c| !c.passed).count(),
                b.checks.len()
            ),
        },
        None => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: "bridge not run".into(),
        },
    };
    let obligation3 = match sweep {
        Some(s) if s.violations.is_empty() => Obligation {
            status: format!("no violation in {} falsification runs", s.runs),
            discharged: true,
            evidence: format!("{} simulations from sampled initial states (seed {}); not a proof", s.runs, s.seed),
        },
        Some(s) => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: format!(
                "{} of {} simulations violate p_rel > 0; first from p0 = {}, v0 = {}",
                s.violations.len(),
                s.runs,
                s.violations[0].p0,
                s.violations[0].v0
            ),
        },
        None => Obligation {
            status: "failed".into(),
            discharged: false,
            evidence: "falsification sweep not run".into(),
        },
    };
    let all = obligation1.discharged && obligation2.discharged && obligation3.discharged;
    LemmaLedger {
        obligation1,
        obligation2,
        obligation3,
        bridge: bridge.cloned().unwrap_or_default(),
        sweep: sweep.cloned(),
        overall: if all { OVERALL_DISCHARGED } else { OVERALL_NOT_DISCHARGED }.into(),
        notes: vec![NON_PROOF.into(), SIGN_CONVENTION.into()],
    }
}

impl LemmaLedger {
    pub fn discharged(&self) -> bool {
        self.overall == OVERALL_DISCHARGED
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ledger serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("Lemma ledger\n");
        for note in &self.notes {
            let _ = writeln!(s, "# {note}");
        }
        for (name, o) in [
            ("1 network property", &self.obligation1),
            ("2 solution property", &self.obligation2),
            ("3 program property", &self.obligation3),
        ] {
            let _ = writeln!(s, "obligation {name}: {} ({})", o.status, o.evidence);
        }
        for c in &self.bridge.checks {
            let _ = writeln!(s, "  bridge {}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
        }
        if let Some(sw) = &self.sweep {
            for v in &sw.violations {
                let _ = writeln!(
                    s,
                    "  violation from p0 = {}, v0 = {}: min p_rel = {} at t = {}",
                    v.p0, v.v0, v.min_p, v.at_t
                );
            }
        }
        let _ = writeln!(s, "overall: {}", self.overall);
        s
    }
}
