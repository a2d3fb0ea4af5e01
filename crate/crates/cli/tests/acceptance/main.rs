//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

mod gen;
mod oracle;

use nspc_checker::{check_certificate, RejectReason};
use nspc_core::certificates::emit_certificate;
use nspc_core::cps_harness::{check_postcondition, simulate, Controller, SimConfig};
use nspc_core::dl_logic::{
    compile_property, conj, disj, draw_samples, eval_loss_exact, grad_check, holds_on_samples, neg, power_mean, Logic,
    LogicConfig,
};
use nspc_core::network::Network;
use nspc_core::rational::{int, Rational};
use nspc_core::spec_lang::{parse_spec, print_spec, typecheck};
use nspc_core::trainer::init_network;
use nspc_core::verifier::{
    bnb_verify, export_queries, export_query, interval_propagate, parse_queries, relax_quadratic, IntervalBox, Limits,
    OutputRow, VerifyQuery, VerifyResult,
};
use nspc_core::verifier::interval::{triangle_upper, NeuronState};
use num_traits::{One, Zero};
use oracle::{dyadic_violation, Dyadic, DyadicNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

/// One random verification instance of criterion 1 and what became of it.
struct Instance {
    seed: u64,
    net: Network,
    net_json: String,
    query: VerifyQuery,
    certificate: Option<String>,
    query_text: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- 1: verifier completeness ----

fn criterion1(instances: &mut Vec<Instance>) -> Outcome {
    let start = Instant::now();
    let (mut proved, mut refuted) = (0, 0);
    for i in 0..100u64 {
        let seed = 1_000 + i;
        let mut r = rng(seed);
        let net = gen::random_network(&mut r);
        let query = gen::random_query(&mut r, &net);
        let expected_violation = oracle::has_violation(&net, &query);
        let (result, _) = bnb_verify(&net, &query, Limits::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        let net_json = net.to_json_string();
        let query_text = export_queries(std::slice::from_ref(&query));
        let certificate = match result {
            VerifyResult::Verified(proof) => {
                ensure(!expected_violation, || format!("seed {seed}: verified, oracle finds a violation"))?;
                proved += 1;
                let cert = emit_certificate(
                    &net,
                    std::slice::from_ref(&query),
                    &[proof],
                    net_json.as_bytes(),
                    query_text.as_bytes(),
                )
                .map_err(|e| e.to_string())?;
                Some(cert.to_json_string())
            }
            VerifyResult::Counterexample(c) => {
                ensure(expected_violation, || format!("seed {seed}: counterexample, oracle finds none"))?;
                ensure(query.is_violation(&net, &c.input), || {
                    format!("seed {seed}: counterexample does not violate the property")
                })?;
                refuted += 1;
                None
            }
            VerifyResult::ResourceLimit { splits } => return Err(format!("seed {seed}: resource limit after {splits} splits")),
        };
        instances.push(Instance {
            seed,
            net,
            net_json,
            query,
            certificate,
            query_text,
        });
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "100/100 agree with phase enumeration ({proved} verified, {refuted} counterexamples) in {elapsed:.1?}"
    ))
}

// ---- 2: certificate round trip and mutation suite ----

fn mutate(cert: &Value, f: impl FnOnce(&mut Value) -> bool) -> Option<Value> {
    let mut c = cert.clone();
    f(&mut c).then_some(c)
}

fn first_leaf(v: &mut Value) -> &mut Value {
    let mut cur = &mut v["obligations"][0];
    while cur["node"] == "split" {
        cur = &mut cur["children"][0]["node"];
    }
    cur
}

fn nonzero_multiplier(leaf: &Value) -> Option<usize> {
    leaf["multipliers"].as_array()?.iter().position(|m| m != "0")
}

/// Applies every corruption that fits the certificate. Each comes with the
/// reason code the checker must report.
fn mutations(cert: &Value) -> Vec<(RejectReason, Value)> {
    let mut out = Vec::new();
    let mut add = |reason, v: Option<Value>| {
        if let Some(v) = v {
            out.push((reason, v));
        }
    };
    add(
        RejectReason::MalformedTree,
        mutate(cert, |c| {
            c["format_version"] = json!(2);
            true
        }),
    );
    add(
        RejectReason::MalformedTree,
        mutate(cert, |c| {
            c["obligations"][0] = json!({"node": "bogus"});
            true
        }),
    );
    let root_is_relu_split = cert["obligations"][0]["node"] == "split" && cert["obligations"][0]["split"]["kind"] == "relu";
    if root_is_relu_split {
        add(
            RejectReason::DuplicateSplit,
            mutate(cert, |c| {
                let root = c["obligations"][0].clone();
                let child = root["children"][0]["node"].clone();
                c["obligations"][0]["children"][0]["node"] = json!({
                    "node": "split",
                    "split": root["split"].clone(),
                    "children": [
                        {"branch": "active", "node": child.clone()},
                        {"branch": "inactive", "node": child},
                    ]
                });
                true
            }),
        );
    }
    if cert["obligations"][0]["node"] == "split" {
        add(
            RejectReason::IncompletePhaseCoverage,
            mutate(cert, |c| {
                c["obligations"][0]["children"].as_array_mut().unwrap().pop();
                true
            }),
        );
    }
    add(
        RejectReason::NegativeMultiplier,
        mutate(cert, |c| {
            let leaf = first_leaf(c);
            match nonzero_multiplier(leaf) {
                Some(i) => {
                    let m = leaf["multipliers"][i].as_str().unwrap().to_string();
                    leaf["multipliers"][i] = json!(format!("-{m}"));
                    true
                }
                None => false,
            }
        }),
    );
    add(
        RejectReason::InvalidCombination,
        mutate(cert, |c| {
            let leaf = first_leaf(c);
            let claimed = leaf["constant"].as_str().unwrap().to_string();
            leaf["constant"] = json!(if claimed == "-1" { "-2" } else { "-1" });
            true
        }),
    );
    add(
        RejectReason::InvalidCombination,
        mutate(cert, |c| {
            let leaf = first_leaf(c);
            let n = leaf["multipliers"].as_array().unwrap().len();
            leaf["multipliers"] = json!(vec!["0"; n]);
            true
        }),
    );
    add(
        RejectReason::LeafSystemMismatch,
        mutate(cert, |c| {
            first_leaf(c)["multipliers"].as_array_mut().unwrap().push(json!("0"));
            true
        }),
    );
    out
}

/// `relu(x) − relu(−x) − relu(x+1) + 1` is zero on [−1, 1], and proving
/// it non-negative there requires ReLU splits.
fn split_instance() -> Instance {
    let net = Network::from_json_str(
        r#"{"layers": [
            {"weights": [["1"],["-1"],["1"]], "bias": ["0","0","1"], "activation": "relu"},
            {"weights": [["1","-1","-1"]], "bias": ["1"], "activation": "identity"}]}"#,
    )
    .unwrap();
    let query = VerifyQuery {
        network: "f".into(),
        outputs: 1,
        bounds: vec![(int(-1), int(1))],
        linear: vec![],
        quadratic: vec![],
        // Violation: f(x) ≤ −1/10.
        output: vec![OutputRow {
            x: vec![int(0)],
            y: vec![int(1)],
            strict: false,
            rhs: gen::q(-1, 10),
        }],
    };
    let (result, _) = bnb_verify(&net, &query, Limits::default()).unwrap();
    let VerifyResult::Verified(proof) = result else {
        panic!("zero network must verify")
    };
    let net_json = net.to_json_string();
    let query_text = export_queries(std::slice::from_ref(&query));
    let cert = emit_certificate(&net, std::slice::from_ref(&query), &[proof], net_json.as_bytes(), query_text.as_bytes())
        .unwrap();
    Instance {
        seed: 0,
        net,
        net_json,
        query,
        certificate: Some(cert.to_json_string()),
        query_text,
    }
}

fn criterion2(instances: &[Instance]) -> Outcome {
    let mut accepted = 0;
    let mut caught: BTreeMap<&'static str, usize> = RejectReason::ALL.iter().map(|r| (r.code(), 0)).collect();
    let extra = split_instance();
    for inst in instances.iter().chain(std::iter::once(&extra)) {
        let Some(cert) = &inst.certificate else { continue };
        let r = check_certificate(cert, inst.net_json.as_bytes(), inst.query_text.as_bytes())
            .map_err(|e| format!("seed {}: {e}", inst.seed))?;
        ensure(r.accepted(), || format!("seed {}: emitted certificate rejected: {:?}", inst.seed, r.verdict))?;
        if inst.seed != 0 {
            accepted += 1;
        }
        let cert_value: Value = serde_json::from_str(cert).unwrap();
        let mut cases = mutations(&cert_value);
        // Same network, different bytes: the digest must still bind them.
        let other_net = inst.net_json.clone() + " ";
        cases.push((RejectReason::DigestMismatch, cert_value.clone()));
        for (i, (want, bad)) in cases.into_iter().enumerate() {
            let net_bytes = if want == RejectReason::DigestMismatch { other_net.as_bytes() } else { inst.net_json.as_bytes() };
            let r = check_certificate(&bad.to_string(), net_bytes, inst.query_text.as_bytes())
                .map_err(|e| format!("seed {}: {e}", inst.seed))?;
            ensure(r.reason() == Some(want), || {
                format!("seed {} mutation {i}: expected {}, got {:?}", inst.seed, want.code(), r.verdict)
            })?;
            *caught.get_mut(want.code()).unwrap() += 1;
        }
    }
    let verified = instances.iter().filter(|i| i.certificate.is_some()).count();
    ensure(accepted == verified, || format!("{accepted}/{verified} accepted"))?;
    let missing: Vec<_> = caught.iter().filter(|(_, n)| **n == 0).map(|(c, _)| *c).collect();
    ensure(missing.is_empty(), || format!("no rejected fixture for {missing:?}"))?;
    let summary: Vec<String> = caught.iter().map(|(c, n)| format!("{c} {n}")).collect();
    Ok(format!("{accepted}/{verified} certificates accepted; rejections: {}", summary.join(", ")))
}

// ---- 3: soundness sampling ----

const FRACTION_BITS: u32 = 20;

/// Uniform dyadic point of the box `bounds`.
fn sample_box(r: &mut ChaCha8Rng, bounds: &[(Rational, Rational)]) -> Vec<Dyadic> {
    bounds
        .iter()
        .map(|(lo, hi)| {
            let lo = Dyadic::from_rational(lo).expect("dyadic box");
            let hi = Dyadic::from_rational(hi).expect("dyadic box");
            let width = hi.add(Dyadic { num: -lo.num, exp: lo.exp });
            let u = Dyadic {
                num: r.gen_range(0..=(1i128 << FRACTION_BITS)),
                exp: FRACTION_BITS,
            };
            lo.add(width.mul(u))
        })
        .collect()
}

fn criterion3(instances: &[Instance]) -> Outcome {
    const N: usize = 100_000;
    let mut checked = 0;
    let mut samples = 0usize;
    for inst in instances.iter().filter(|i| i.certificate.is_some()) {
        let dnet = DyadicNet::new(&inst.net).ok_or("random networks are dyadic")?;
        let mut r = rng(inst.seed ^ 0x5eed);
        let (mut inside, mut attempts) = (0, 0);
        while inside < N && attempts < 20 * N {
            attempts += 1;
            let x = sample_box(&mut r, &inst.query.bounds);
            let in_region = inst.query.linear.iter().all(|row| oracle::row_holds(&row.x, &x, row.strict, &row.rhs));
            if !in_region {
                continue;
            }
            inside += 1;
            let bad = dyadic_violation(&dnet, &inst.query, &x);
            if inside <= 200 {
                // Cross-check the fixed-point evaluator against rationals.
                let xq: Vec<Rational> = x.iter().map(|d| d.to_rational()).collect();
                ensure(bad == inst.query.is_violation(&inst.net, &xq), || {
                    format!("seed {}: fixed-point and rational evaluation disagree", inst.seed)
                })?;
            }
            ensure(!bad, || format!("seed {}: sampled violation of a certified property", inst.seed))?;
        }
        samples += inside;
        checked += 1;
    }
    Ok(format!("{checked} certified queries, {samples} region samples, 0 violations"))
}

// ---- 4: quantitative-logic laws ----

fn unit_rational(r: &mut ChaCha8Rng) -> Rational {
    let d = r.gen_range(1..=64);
    Rational::new(r.gen_range(0..=d).into(), d.into())
}

fn criterion4() -> Outcome {
    let mut r = rng(4);
    let (zero, one) = (Rational::zero(), Rational::one());
    let g = Logic::Godel;
    for i in 0..10_000 {
        let (a, b, c) = (unit_rational(&mut r), unit_rational(&mut r), unit_rational(&mut r));
        let laws = [
            ("and idempotent", conj(g, &a, &a) == a),
            ("or idempotent", disj(g, &a, &a) == a),
            ("and commutative", conj(g, &a, &b) == conj(g, &b, &a)),
            ("or commutative", disj(g, &a, &b) == disj(g, &b, &a)),
            ("and associative", conj(g, &conj(g, &a, &b), &c) == conj(g, &a, &conj(g, &b, &c))),
            ("or associative", disj(g, &disj(g, &a, &b), &c) == disj(g, &a, &disj(g, &b, &c))),
            ("and unit", conj(g, &a, &one) == a),
            ("or unit", disj(g, &a, &zero) == a),
            (
                "monotone",
                a > b || (conj(g, &a, &c) <= conj(g, &b, &c) && disj(g, &a, &c) <= disj(g, &b, &c)),
            ),
            (
                "Lukasiewicz De Morgan",
                neg(&conj(Logic::Lukasiewicz, &a, &b)) == disj(Logic::Lukasiewicz, &neg(&a), &neg(&b))
                    && neg(&disj(Logic::Lukasiewicz, &a, &b)) == conj(Logic::Lukasiewicz, &neg(&a), &neg(&b)),
            ),
        ];
        for (name, ok) in laws {
            ensure(ok, || format!("{name} fails at draw {i}: a={a}, b={b}, c={c}"))?;
        }
    }

    let mut zeros = 0;
    for i in 0..1_000u64 {
        let mut r = rng(40_000 + i);
        let src = gen::random_lawvere_spec(&mut r);
        let spec = typecheck(parse_spec(&src).map_err(|e| format!("{src}: {e}"))?).map_err(|e| format!("{src}: {e:?}"))?;
        let net = Network::from_json_str(&format!(
            r#"{{"layers": [
                {{"weights": [["{}"]], "bias": ["{}"], "activation": "relu"}},
                {{"weights": [["{}"]], "bias": ["{}"], "activation": "identity"}}]}}"#,
            gen::q(r.gen_range(-8..=8), 4),
            gen::q(r.gen_range(-4..=4), 4),
            gen::q(r.gen_range(-8..=8), 4),
            gen::q(r.gen_range(-4..=4), 4),
        ))
        .unwrap();
        let cfg = LogicConfig {
            logic: Logic::LawvereLoss,
            samples: r.gen_range(1..=8),
            ..LogicConfig::default()
        };
        let term = compile_property(&spec, "p", &cfg).map_err(|e| format!("{src}: {e}"))?;
        let samples = draw_samples(&term, i).map_err(|e| e.to_string())?;
        let loss = eval_loss_exact(&term, &net, &samples).map_err(|e| e.to_string())?;
        let holds = holds_on_samples(&term, &net, &samples, true).map_err(|e| e.to_string())?;
        ensure(loss.is_zero() == holds, || format!("instance {i}: loss {loss}, satisfied {holds}\n{src}"))?;
        zeros += usize::from(holds);
    }
    Ok(format!(
        "Godel laws and Lukasiewicz De Morgan exact on 10^4 draws; Lawvere zero-loss iff satisfied on 10^3 instances ({zeros} satisfied)"
    ))
}

// ---- 5: gradient correctness ----

const CAR_SPEC: &str = include_str!("../../../../demo/car/car.nsp");

fn criterion5() -> Outcome {
    let spec = typecheck(parse_spec(CAR_SPEC).unwrap()).unwrap();
    let cfg = LogicConfig {
        samples: 32,
        ..LogicConfig::default()
    };
    let term = compile_property(&spec, "xi_train", &cfg).map_err(|e| e.to_string())?;
    let (mut worst, mut compared, mut excluded) = (0.0f64, 0, 0);
    for i in 0..100u64 {
        let net = init_network(&[2, 8, 1], 1.0, 500 + i).map_err(|e| e.to_string())?;
        let samples = draw_samples(&term, 900 + i).map_err(|e| e.to_string())?;
        let report = grad_check(&term, &net, &samples, 1e-6).map_err(|e| e.to_string())?;
        ensure(report.compared > 0, || format!("point {i}: every parameter is kink-adjacent"))?;
        worst = worst.max(report.max_rel_err);
        compared += report.compared;
        excluded += report.excluded;
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!(
        "max relative error {worst:.2e} over {compared} partials at 100 points ({excluded} kink-adjacent excluded)"
    ))
}

// ---- 6: p-mean limit ----

fn criterion6() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let v: Vec<f64> = (0..3).map(|_| r.gen_range(0.1..=1.0)).collect();
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max((power_mean(&v, -64.0) - min).abs());
    }
    ensure(worst <= 0.05, || format!("max deviation {worst}"))?;
    Ok(format!("max |M_-64 - min| = {worst:.4}"))
}

// ---- 7: IBP and relaxation soundness ----

fn containment_violations(net: &Network, ibp: &IntervalBox, x: &[Rational]) -> usize {
    let pre = net.pre_activations_exact(x).expect("dimensions");
    let mut bad = 0;
    for (l, layer_pre) in pre.iter().enumerate() {
        for (j, z) in layer_pre.iter().enumerate() {
            let (lo, hi) = &ibp.pre[l][j];
            bad += usize::from(z < lo || z > hi);
            if l < ibp.states.len() {
                let y = if ibp.states[l][j] == NeuronState::Identity { z.clone() } else { z.max(&Rational::zero()).clone() };
                let (plo, phi) = &ibp.post[l][j];
                bad += usize::from(y < *plo || y > *phi);
                if ibp.states[l][j] == NeuronState::Ambiguous {
                    let up = triangle_upper(lo, hi);
                    bad += usize::from(y < Rational::zero() || y < *z || y > up.at(z));
                }
            }
        }
    }
    bad
}

type InputBox = Vec<(Rational, Rational)>;

fn criterion7() -> Outcome {
    const N: usize = 100_000;
    let random = gen::random_network(&mut rng(7_007));
    let random_box = vec![(gen::q(-3, 2), gen::q(5, 4)); random.input_dim()];
    let fixtures: Vec<(&str, Network, InputBox)> = vec![
        (
            "TN1",
            Network::from_json_str(
                r#"{"layers": [{"weights": [["1","0"],["0","1"]], "bias": ["0","0"], "activation": "relu"},
                               {"weights": [["-1","-1"]], "bias": ["0"], "activation": "identity"}]}"#,
            )
            .unwrap(),
            vec![(int(-1), int(1)); 2],
        ),
        (
            "TN-ABS",
            Network::from_json_str(
                r#"{"layers": [{"weights": [["1"],["-1"]], "bias": ["0","0"], "activation": "relu"},
                               {"weights": [["1","1"]], "bias": ["0"], "activation": "identity"}]}"#,
            )
            .unwrap(),
            vec![(int(-1), int(1))],
        ),
        (
            "2-8-1",
            init_network(&[2, 8, 1], 1.0, 77).unwrap(),
            vec![(int(-1), int(1)); 2],
        ),
        ("random", random, random_box),
    ];
    let mut report = Vec::new();
    for (name, net, bounds) in fixtures {
        let ibp = interval_propagate(&net, &bounds);
        let mut r = rng(70);
        let mut bad = 0;
        for _ in 0..N {
            let x: Vec<Rational> = sample_box(&mut r, &bounds).into_iter().map(Dyadic::to_rational).collect();
            bad += containment_violations(&net, &ibp, &x);
        }
        ensure(bad == 0, || format!("{name}: {bad} containment or triangle violations"))?;
        report.push(name);
    }
    let mut r = rng(71);
    for _ in 0..N {
        let lo = gen::q(r.gen_range(-64..=64), 16);
        let hi = &lo + gen::q(r.gen_range(1..=64), 16);
        let v = &lo + (&hi - &lo) * gen::q(r.gen_range(0..=1024), 1024);
        let (secant, tangents) = relax_quadratic(&lo, &hi);
        let sq = &v * &v;
        ensure(sq <= secant.at(&v) && tangents.iter().all(|t| t.at(&v) <= sq), || {
            format!("quadratic relaxation fails at v={v} on [{lo}, {hi}]")
        })?;
    }
    Ok(format!(
        "0 violations over 10^5 points each for {}, and 10^5 quadratic secant/tangent checks",
        report.join(", ")
    ))
}

// ---- 8: end-to-end car pipeline ----

fn nspc(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nspc"))
        .args(args)
        .output()
        .expect("nspc binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nspc-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn criterion8() -> Outcome {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../demo/car/nspc.toml");
    let out = scratch_dir("car");
    let set_out = format!("paths.output_dir={}", out.display());
    let start = Instant::now();
    let (code, log) = nspc(&["-c", config, "--set", &set_out, "--set", "seed=7", "pipeline"]);
    let elapsed = start.elapsed();
    ensure(code == 0, || format!("pipeline exit {code}:\n{log}"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("pipeline took {elapsed:.1?}"))?;

    let summary = std::fs::read_to_string(out.join("train_summary.txt")).map_err(|e| e.to_string())?;
    let sat = summary
        .lines()
        .find_map(|l| l.split_once("sampled satisfaction of xi: "))
        .and_then(|(_, s)| s.split_once('/'))
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or("no satisfaction line")?;
    ensure(sat.1 == 10_000 && sat.0 * 100 >= sat.1 * 99, || format!("sampled satisfaction {}/{}", sat.0, sat.1))?;

    let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}"));
    let check = check_certificate(
        &String::from_utf8(read("certificate.nspc")?).unwrap(),
        &read("network.json")?,
        &read("queries.txt")?,
    )
    .map_err(|e| e.to_string())?;
    ensure(check.accepted(), || format!("certificate rejected: {:?}", check.verdict))?;

    let ledger: Value = serde_json::from_slice(&read("ledger.json")?).map_err(|e| e.to_string())?;
    for k in ["obligation1", "obligation2", "obligation3"] {
        ensure(ledger[k]["discharged"] == true, || format!("{k} not discharged: {}", ledger[k]))?;
    }
    let checks = ledger["bridge"]["checks"].as_array().ok_or("no bridge checks")?;
    ensure(!checks.is_empty() && checks.iter().all(|c| c["passed"] == true), || "bridge check failed".into())?;
    ensure(ledger["sweep"]["runs"] == 100, || "sweep did not run 100 times".into())?;
    ensure(ledger["sweep"]["violations"].as_array().is_some_and(Vec::is_empty), || {
        "sweep found violations".into()
    })?;

    // A stalled training run must end in a clean refutation.
    let stalled = scratch_dir("stalled");
    let set_stalled = format!("paths.output_dir={}", stalled.display());
    let (code, log) = nspc(&[
        "-c",
        config,
        "--set",
        &set_stalled,
        "--set",
        "train.epochs=1",
        "--set",
        "train.learning_rate=0",
        "pipeline",
    ]);
    ensure(code == 1, || format!("stalled pipeline exit {code}:\n{log}"))?;
    ensure(stalled.join("counterexample.json").exists(), || "stalled run wrote no counterexample".into())?;
    ensure(!stalled.join("certificate.nspc").exists(), || "stalled run wrote a certificate".into())?;
    let _ = std::fs::remove_dir_all(&out);
    let _ = std::fs::remove_dir_all(&stalled);
    Ok(format!(
        "satisfaction {}/{}, certificate accepted, bridge all-pass, 0/100 sweep violations, {elapsed:.1?}; stalled run refuted with exit 1",
        sat.0, sat.1
    ))
}

// ---- 9: kinematic exactness ----

fn criterion9() -> Outcome {
    let brake = int(-1);
    let cfg = SimConfig::default();
    let traj = simulate(Controller::Constant(&brake), &cfg).map_err(|e| e.to_string())?;
    let post = check_postcondition(&traj).ok_or("empty trajectory")?;
    ensure(post.min_p == int(8) && post.argmin_t == int(2), || {
        format!("min p_rel {} at t {}", post.min_p, post.argmin_t)
    })?;
    Ok("min p_rel = 8 exactly at t = 2".into())
}

// ---- 10: round trips ----

fn criterion10() -> Outcome {
    for i in 0..100u64 {
        let spec = gen::random_spec(&mut rng(10_000 + i));
        let text = print_spec(&spec);
        let back = parse_spec(&text).map_err(|e| format!("spec {i}: {e}\n{text}"))?;
        ensure(back == spec, || format!("spec {i} changed after print/parse:\n{text}"))?;
    }
    for i in 0..50u64 {
        let q = gen::random_export_query(&mut rng(20_000 + i));
        let text = export_query(&q);
        let back = parse_queries(&text).map_err(|e| format!("query {i}: {e:?}\n{text}"))?;
        ensure(back == vec![q], || format!("query {i} changed after export/parse:\n{text}"))?;
    }
    Ok("100/100 specs and 50/50 queries round-trip".into())
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
        Err(detail) => println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.1}s]"),
    }
    result.is_ok()
}

fn main() -> ExitCode {
    let mut instances = Vec::new();
    let results = [
        run(1, "verifier completeness vs phase enumeration", || criterion1(&mut instances)),
        run(2, "certificate round trip and mutation suite", || criterion2(&instances)),
        run(3, "soundness sampling of certified queries", || criterion3(&instances)),
        run(4, "quantitative-logic laws", criterion4),
        run(5, "gradient vs central differences", criterion5),
        run(6, "p-mean limit", criterion6),
        run(7, "interval and relaxation soundness", criterion7),
        run(8, "end-to-end car pipeline (seed 7)", criterion8),
        run(9, "kinematic exactness", criterion9),
        run(10, "parser and export round trips", criterion10),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
