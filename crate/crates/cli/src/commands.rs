//! One function per subcommand. Results go to files in the output
//! directory and to stdout; diagnostics go to stderr.

use crate::config::ToolConfig;
use anyhow::{anyhow, bail, Context, Result};
use nspc_checker::{check_certificate, CheckResult, Verdict};
use nspc_core::certificates::emit_certificate;
use nspc_core::cps_harness::{
    assemble_ledger, check_embedding_bridge, check_postcondition, falsification_sweep, simulate, trajectory_csv,
    Controller, LemmaLedger,
};
use nspc_core::dl_logic::{compile_property, make_regression_loss, sample_domain, satisfaction_count};
use nspc_core::network::{load_embedding, Network};
use nspc_core::rational::{format_rational, to_f64};
use nspc_core::spec_lang::{parse_spec, typecheck, TypedSpec};
use nspc_core::trainer::{init_network, train};
use nspc_core::verifier::{
    bnb_verify, compile_property_queries, export_queries, query::describe_output_row, ProofNode, VerifyQuery,
    VerifyResult,
};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Refuted = 1,
    Usage = 2,
    ResourceLimit = 3,
}

fn load_spec(cfg: &ToolConfig) -> Result<TypedSpec> {
    let path = cfg.required_path("spec")?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let spec = parse_spec(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    typecheck(spec).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}: {e}", path.display())).collect();
        anyhow!("{}", lines.join("\n"))
    })
}

fn out_dir(cfg: &ToolConfig) -> Result<PathBuf> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_network(path: &Path) -> Result<(Vec<u8>, Network)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let net = Network::from_json_str(text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok((bytes, net))
}

pub fn check(cfg: &ToolConfig) -> Result<Status> {
    let spec = load_spec(cfg)?;
    let s = &spec.spec;
    println!(
        "ok: {} network(s), {} constant(s), {} propert{}",
        s.networks.len(),
        s.constants.len(),
        s.properties.len(),
        if s.properties.len() == 1 { "y" } else { "ies" }
    );
    for p in &s.properties {
        println!("  prop {}", p.name);
    }
    Ok(Status::Success)
}

pub struct Trained {
    pub network_path: PathBuf,
    pub satisfaction: Option<(usize, usize)>,
}

pub fn train_cmd(cfg: &ToolConfig) -> Result<(Status, Trained)> {
    let spec = load_spec(cfg)?;
    let logic = cfg.logic_config()?;
    let tcfg = cfg.train_config()?;
    let prop = cfg.property("train")?;
    let term = compile_property(&spec, &prop, &logic)?;
    let init = init_network(&cfg.train.architecture, tcfg.init_scale, cfg.init_seed())?;
    if let Some(decl) = term.network() {
        if decl.input_dim != init.input_dim() || decl.output_dim != init.output_dim() {
            bail!(
                "train.architecture {:?} does not match network {} : {} -> {}",
                cfg.train.architecture,
                decl.name,
                decl.input_dim,
                decl.output_dim
            );
        }
    }
    let regression = match &cfg.train.regression_target {
        Some(target) => {
            let q = term
                .quantifiers
                .first()
                .ok_or_else(|| anyhow!("regression data is sampled from the training property's quantifier"))?;
            let points = sample_domain(&q.vars, &q.domain, term.constants(), cfg.train.regression_samples, cfg.regression_seed())?;
            let y: Vec<_> = target.iter().map(|t| t.0.clone()).collect();
            let data: Vec<_> = points.into_iter().map(|x| (x, y.clone())).collect();
            Some(make_regression_loss(&init, &data)?)
        }
        None => None,
    };
    log::info!("training {prop} for {} epochs", tcfg.epochs);
    let out = train(&init, &term, regression.as_ref(), &tcfg)?;

    let dir = out_dir(cfg)?;
    let network_path = dir.join("network.json");
    write(&network_path, &out.network.to_json_string())?;
    let mut hist = String::from("epoch,loss\n");
    for (i, l) in out.history.iter().enumerate() {
        let _ = writeln!(hist, "{i},{l:e}");
    }
    write(&dir.join("train_history.csv"), &hist)?;

    let mut summary = format!(
        "initial loss {:e}\nbest loss {:e} at epoch {}\n",
        out.history[0],
        out.best_loss(),
        out.best_epoch
    );
    let satisfaction = match &cfg.property.verify {
        Some(name) => {
            let vterm = compile_property(&spec, name, &logic)?;
            let (ok, n) = satisfaction_count(&vterm, &out.network, cfg.sim.satisfaction_samples, cfg.satisfaction_seed())?;
            let _ = writeln!(summary, "sampled satisfaction of {name}: {ok}/{n}");
            Some((ok, n))
        }
        None => None,
    };
    write(&dir.join("train_summary.txt"), &summary)?;
    print!("{summary}");
    println!("wrote {}", network_path.display());
    Ok((
        Status::Success,
        Trained {
            network_path,
            satisfaction,
        },
    ))
}

pub struct Verified {
    pub certificate: PathBuf,
    pub queries_path: PathBuf,
    pub queries: Vec<VerifyQuery>,
}

/// Compiles the verify property for the network at `net_path`, writes the
/// query file, and runs branch and bound on every query.
pub fn verify_cmd(cfg: &ToolConfig, net_path: &Path) -> Result<(Status, Option<Verified>)> {
    let spec = load_spec(cfg)?;
    let prop = cfg.property("verify")?;
    let (net_bytes, net) = read_network(net_path)?;
    let queries = compile_property_queries(&spec, &prop, &net)?;
    let dir = out_dir(cfg)?;
    for stale in ["certificate.nspc", "counterexample.json"] {
        let _ = fs::remove_file(dir.join(stale));
    }
    let query_text = export_queries(&queries);
    let queries_path = dir.join("queries.txt");
    write(&queries_path, &query_text)?;

    let mut proofs: Vec<ProofNode> = Vec::new();
    let mut report = format!("property {prop}: {} quer{}\n", queries.len(), if queries.len() == 1 { "y" } else { "ies" });
    for (i, q) in queries.iter().enumerate() {
        log::info!("verifying query {i} of {prop}");
        let (result, stats) = bnb_verify(&net, q, cfg.limits())?;
        let _ = writeln!(
            report,
            "query {i}: {} splits, {} LP calls, {} interval leaves, {} LP leaves",
            stats.splits, stats.lp_calls, stats.interval_leaves, stats.lp_leaves
        );
        match result {
            VerifyResult::Verified(p) => proofs.push(p),
            VerifyResult::Counterexample(c) => {
                let _ = writeln!(report, "result: counterexample");
                let input: Vec<String> = c.input.iter().map(format_rational).collect();
                let output: Vec<String> = c.output.iter().map(format_rational).collect();
                let approx: Vec<f64> = c.input.iter().chain(&c.output).map(to_f64).collect();
                let json = serde_json::json!({
                    "property": prop,
                    "query": i,
                    "input": input,
                    "output": output,
                    "approximate_input_then_output": approx,
                    "violation_condition": q.output.iter().map(describe_output_row).collect::<Vec<_>>(),
                });
                write(&dir.join("counterexample.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
                write(&dir.join("verify_result.txt"), &report)?;
                print!("{report}");
                let n = c.input.len();
                println!(
                    "counterexample input ≈ {:?} output ≈ {:?} (exact values in counterexample.json)",
                    &approx[..n],
                    &approx[n..]
                );
                return Ok((Status::Refuted, None));
            }
            VerifyResult::ResourceLimit { splits } => {
                let _ = writeln!(report, "result: resource limit after {splits} splits");
                write(&dir.join("verify_result.txt"), &report)?;
                print!("{report}");
                return Ok((Status::ResourceLimit, None));
            }
        }
    }
    let cert = emit_certificate(&net, &queries, &proofs, &net_bytes, query_text.as_bytes())?;
    let certificate = dir.join("certificate.nspc");
    write(&certificate, &cert.to_json_string())?;
    let _ = writeln!(report, "result: verified ({} leaves)", cert.leaves());
    write(&dir.join("verify_result.txt"), &report)?;
    print!("{report}");
    println!("wrote {}", certificate.display());
    Ok((
        Status::Success,
        Some(Verified {
            certificate,
            queries_path,
            queries,
        }),
    ))
}

pub fn check_cert_cmd(cert: &Path, network: &Path, queries: &Path) -> Result<(Status, CheckResult)> {
    let cert_text = fs::read_to_string(cert).with_context(|| format!("reading {}", cert.display()))?;
    let net = fs::read(network).with_context(|| format!("reading {}", network.display()))?;
    let q = fs::read(queries).with_context(|| format!("reading {}", queries.display()))?;
    let result = check_certificate(&cert_text, &net, &q)?;
    match &result.verdict {
        Verdict::Accepted => {
            println!(
                "accepted: {} leaves checked, max multiplier {}",
                result.leaves_checked,
                format_rational(&result.max_multiplier)
            );
            Ok((Status::Success, result))
        }
        Verdict::Rejected { reason, path, detail } => {
            println!("rejected: {reason} at {path}: {detail}");
            Ok((Status::Refuted, result))
        }
    }
}

pub fn export_cmd(cfg: &ToolConfig) -> Result<Status> {
    let spec = load_spec(cfg)?;
    let prop = cfg.property("verify")?;
    let (_, net) = read_network(&cfg.required_path("network")?)?;
    let queries = compile_property_queries(&spec, &prop, &net)?;
    let path = out_dir(cfg)?.join("queries.txt");
    write(&path, &export_queries(&queries))?;
    println!("wrote {} ({} quer{})", path.display(), queries.len(), if queries.len() == 1 { "y" } else { "ies" });
    Ok(Status::Success)
}

pub fn simulate_cmd(cfg: &ToolConfig) -> Result<Status> {
    let (_, net) = read_network(&cfg.required_path("network")?)?;
    let emb = load_embedding(&cfg.required_path("embedding")?)?;
    let traj = simulate(Controller::Neural { net: &net, emb: &emb }, &cfg.sim_config())?;
    let path = out_dir(cfg)?.join("trajectory.csv");
    write(&path, &trajectory_csv(&traj))?;
    let post = check_postcondition(&traj).expect("nonempty trajectory");
    println!(
        "min p_rel = {} at t = {}; postcondition p_rel > 0 {}",
        to_f64(&post.min_p),
        format_rational(&post.argmin_t),
        if post.holds { "holds" } else { "VIOLATED" }
    );
    println!("wrote {}", path.display());
    Ok(if post.holds { Status::Success } else { Status::Refuted })
}

/// train → verify → check-cert → bridge → sweep → ledger.
pub fn pipeline_cmd(cfg: &ToolConfig) -> Result<(Status, LemmaLedger)> {
    let (_, trained) = train_cmd(cfg)?;
    let (vstatus, verified) = verify_cmd(cfg, &trained.network_path)?;
    let (_, net) = read_network(&trained.network_path)?;
    let spec = load_spec(cfg)?;
    let emb = load_embedding(&cfg.required_path("embedding")?)?;

    let cert = match &verified {
        Some(v) => {
            let (_, r) = check_cert_cmd(&v.certificate, &trained.network_path, &v.queries_path)?;
            Some((v.certificate.display().to_string(), r.accepted()))
        }
        None => None,
    };
    log::info!("checking the embedding bridge");
    let problem = cfg.property("problem")?;
    let problem_queries = compile_property_queries(&spec, &problem, &net)?;
    let bridge = verified
        .as_ref()
        .map(|v| check_embedding_bridge(&emb, &v.queries, &problem_queries));
    let sweep = if verified.is_some() {
        log::info!("running {} falsification simulations", cfg.sim.sweep_runs);
        Some(falsification_sweep(
            Controller::Neural { net: &net, emb: &emb },
            &cfg.sim_config(),
            cfg.sim.sweep_runs,
            cfg.sweep_seed(),
        )?)
    } else {
        None
    };
    let cert_ref = cert.as_ref().map(|(p, ok)| (p.as_str(), *ok));
    let ledger = assemble_ledger(cert_ref, bridge.as_ref(), sweep.as_ref());
    let dir = out_dir(cfg)?;
    let mut text = ledger.to_text();
    if let Some((ok, n)) = trained.satisfaction {
        let _ = writeln!(text, "training: sampled satisfaction {ok}/{n}");
    }
    write(&dir.join("ledger.txt"), &text)?;
    write(&dir.join("ledger.json"), &ledger.to_json_string())?;
    print!("{text}");
    let status = match vstatus {
        Status::ResourceLimit => Status::ResourceLimit,
        _ if ledger.discharged() => Status::Success,
        _ => Status::Refuted,
    };
    Ok((status, ledger))
}
