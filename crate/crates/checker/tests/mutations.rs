//! The checker accepts what the verifier emits and rejects each targeted
//! corruption with its own reason code.

use nspc_checker::{check_certificate, RejectReason};
use nspc_core::certificates::emit_certificate;
use nspc_core::network::Network;
use nspc_core::rational::{int, ratio};
use nspc_core::verifier::{bnb_verify, export_queries, parse_queries, Limits, OutputRow, VerifyQuery, VerifyResult};
use serde_json::{json, Value};

const TN_ABS: &str = r#"{"layers": [
    {"weights": [["1"],["-1"]], "bias": ["0","0"], "activation": "relu"},
    {"weights": [["1","1"]], "bias": ["0"], "activation": "identity"}]}"#;

/// `relu(x) - relu(-x) - relu(x+1) + 1`, identically zero on [-1, 1]; its
/// proofs need ReLU splits.
const ZERO_NET: &str = r#"{"layers": [
    {"weights": [["1"],["-1"],["1"]], "bias": ["0","0","1"], "activation": "relu"},
    {"weights": [["1","-1","-1"]], "bias": ["1"], "activation": "identity"}]}"#;

fn lower_bound_query(rhs: (i64, i64)) -> VerifyQuery {
    VerifyQuery {
        network: "f".into(),
        outputs: 1,
        bounds: vec![(int(-1), int(1))],
        linear: vec![],
        quadratic: vec![],
        output: vec![OutputRow {
            x: vec![int(0)],
            y: vec![int(-1)],
            strict: false,
            rhs: ratio(rhs.0, rhs.1),
        }],
    }
}

struct Fixture {
    net: String,
    queries: String,
    cert: Value,
}

fn fixture(net_text: &str, q: VerifyQuery) -> Fixture {
    let net = Network::from_json_str(net_text).unwrap();
    let (r, _) = bnb_verify(&net, &q, Limits::default()).unwrap();
    let VerifyResult::Verified(proof) = r else {
        panic!("expected a proof, got {r:?}")
    };
    let queries = export_queries(std::slice::from_ref(&q));
    let cert = emit_certificate(&net, &[q], &[proof], net_text.as_bytes(), queries.as_bytes()).unwrap();
    Fixture {
        net: net_text.to_string(),
        queries,
        cert: serde_json::from_str(&cert.to_json_string()).unwrap(),
    }
}

fn split_fixture() -> Fixture {
    let f = fixture(ZERO_NET, lower_bound_query((-1, 10)));
    assert_eq!(f.cert["obligations"][0]["node"], "split");
    f
}

fn check(f: &Fixture, cert: &Value) -> Option<RejectReason> {
    let r = check_certificate(&cert.to_string(), f.net.as_bytes(), f.queries.as_bytes()).unwrap();
    r.reason()
}

/// The first leaf reached by always taking the first child.
fn first_leaf(v: &mut Value) -> &mut Value {
    let mut cur = &mut v["obligations"][0];
    while cur["node"] == "split" {
        cur = &mut cur["children"][0]["node"];
    }
    cur
}

fn first_nonzero(leaf: &Value) -> usize {
    leaf["multipliers"]
        .as_array()
        .unwrap()
        .iter()
        .position(|m| m != "0")
        .unwrap()
}

#[test]
fn abs_certificate_is_accepted() {
    let f = fixture(TN_ABS, lower_bound_query((-3, 2)));
    let r = check_certificate(&f.cert.to_string(), f.net.as_bytes(), f.queries.as_bytes()).unwrap();
    assert!(r.accepted(), "{r:?}");
    assert!(r.leaves_checked <= 4);
}

#[test]
fn split_certificate_is_accepted() {
    let f = split_fixture();
    assert_eq!(check(&f, &f.cert), None);
}

#[test]
fn changed_weight_is_digest_mismatch() {
    let mut f = split_fixture();
    f.net = f.net.replacen(r#"["1","-1","-1"]"#, r#"["1","-1","-2"]"#, 1);
    assert_eq!(check(&f, &f.cert.clone()), Some(RejectReason::DigestMismatch));
}

#[test]
fn out_of_range_neuron_is_malformed() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    c["obligations"][0]["split"]["neuron"] = json!(7);
    assert_eq!(check(&f, &c), Some(RejectReason::MalformedTree));
    let mut c = f.cert.clone();
    c["format_version"] = json!(99);
    assert_eq!(check(&f, &c), Some(RejectReason::MalformedTree));
}

#[test]
fn repeated_neuron_is_duplicate_split() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    let root = c["obligations"][0].clone();
    let child = root["children"][0]["node"].clone();
    let dup = json!({
        "node": "split",
        "split": root["split"].clone(),
        "children": [
            {"branch": "active", "node": child.clone()},
            {"branch": "inactive", "node": child},
        ]
    });
    c["obligations"][0]["children"][0]["node"] = dup;
    assert_eq!(check(&f, &c), Some(RejectReason::DuplicateSplit));
}

#[test]
fn deleted_leaf_is_incomplete_coverage() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    c["obligations"][0]["children"].as_array_mut().unwrap().pop();
    assert_eq!(check(&f, &c), Some(RejectReason::IncompletePhaseCoverage));
}

#[test]
fn negated_multiplier_is_rejected() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    let leaf = first_leaf(&mut c);
    let i = first_nonzero(leaf);
    let m = leaf["multipliers"][i].as_str().unwrap().to_string();
    leaf["multipliers"][i] = json!(format!("-{m}"));
    assert_eq!(check(&f, &c), Some(RejectReason::NegativeMultiplier));
}

#[test]
fn scaled_multiplier_is_invalid_combination() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    let leaf = first_leaf(&mut c);
    let i = first_nonzero(leaf);
    leaf["multipliers"][i] = json!("1000");
    assert_eq!(check(&f, &c), Some(RejectReason::InvalidCombination));

    let mut c = f.cert.clone();
    first_leaf(&mut c)["constant"] = json!("-12345");
    assert_eq!(check(&f, &c), Some(RejectReason::InvalidCombination));
}

#[test]
fn dropped_multiplier_is_leaf_system_mismatch() {
    let f = split_fixture();
    let mut c = f.cert.clone();
    first_leaf(&mut c)["multipliers"].as_array_mut().unwrap().pop();
    assert_eq!(check(&f, &c), Some(RejectReason::LeafSystemMismatch));
}

#[test]
fn every_reason_code_is_distinct() {
    let codes: std::collections::HashSet<_> = RejectReason::ALL.iter().map(|r| r.code()).collect();
    assert_eq!(codes.len(), 7);
}

#[test]
fn query_file_must_parse() {
    let f = split_fixture();
    assert!(check_certificate(&f.cert.to_string(), f.net.as_bytes(), b"Query\n").is_err());
    assert_eq!(parse_queries(&f.queries).unwrap().len(), 1);
}
