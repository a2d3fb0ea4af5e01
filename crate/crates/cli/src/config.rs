//! Tool configuration: a TOML file plus `--set section.key=value` overrides.
//!
//! ```toml
//! seed = 7                      # global seed; module seeds are derived from it
//!
//! [paths]                       # relative to the config file's directory
//! spec = "car.nsp"
//! network = "controller.json"   # input network (pipeline: written by training)
//! embedding = "embedding.json"
//! output_dir = "out"
//!
//! [property]
//! train = "xi_train"            # property used as the training objective
//! verify = "xi"                 # network property to prove
//! problem = "phi"               # solution property checked by the bridge
//!
//! [logic]
//! logic = "lawvere"             # godel | lukasiewicz | lawvere
//! quantifier = "minmax"         # minmax | pmean
//! p = 8.0
//! tau = "1/10"
//! samples = 512
//!
//! [train]
//! architecture = [2, 8, 1]
//! learning_rate = 0.05
//! epochs = 500
//! batch = 256
//! regression_weight = 0.5
//! regression_target = ["-1/5"]  # optional: regress to this constant output
//! regression_samples = 256
//! init_scale = 0.5
//!
//! [verifier]
//! max_splits = 20000
//! timeout = 120                 # seconds
//!
//! [sim]
//! braking = "1"
//! control_period = "1/10"
//! step = "1/100"
//! horizon = "10"
//! p0 = "10"
//! v0 = "-2"
//! v_range = ["-5", "5"]
//! p_range = ["0", "10"]
//! stop_braking_at_zero = false
//! sweep_runs = 100
//! satisfaction_samples = 10000
//! ```
//!
//! Rationals are strings (`"1/10"`, `"0.1"`) or integers. Seeds derived
//! from the global seed `s`: initialization `s`, quantifier sampling
//! `s + 1`, regression data `s + 2`, falsification sweep `s + 3`,
//! satisfaction sampling `s + 4`.

use nspc_core::dl_logic::{Logic, LogicConfig, QuantSemantics};
use nspc_core::rational::{parse_rational, Rational};
use nspc_core::trainer::TrainConfig;
use nspc_core::cps_harness::SimConfig;
use nspc_core::verifier::Limits;
use serde::de::{self, Deserializer};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

/// A rational written as a string or an integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Q(pub Rational);

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d).map_err(|_| de::Error::custom("expected a rational as a string or an integer"))? {
            Raw::Int(i) => Ok(Q(Rational::from_integer(i.into()))),
            Raw::Str(s) => parse_rational(&s).map(Q).map_err(de::Error::custom),
        }
    }
}

fn q(n: i64, d: i64) -> Q {
    Q(Rational::new(n.into(), d.into()))
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub spec: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub embedding: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Properties {
    pub train: Option<String>,
    pub verify: Option<String>,
    pub problem: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogicSection {
    pub logic: String,
    pub quantifier: String,
    pub p: f64,
    pub tau: Q,
    pub samples: usize,
    pub sharp_atoms: bool,
    pub lawvere_product: bool,
}

impl Default for LogicSection {
    fn default() -> Self {
        LogicSection {
            logic: "lawvere".into(),
            quantifier: "minmax".into(),
            p: 8.0,
            tau: q(1, 10),
            samples: 512,
            sharp_atoms: false,
            lawvere_product: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub architecture: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: usize,
    pub regression_weight: f64,
    pub regression_target: Option<Vec<Q>>,
    pub regression_samples: usize,
    pub init_scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            architecture: vec![2, 8, 1],
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch: t.batch,
            regression_weight: t.regression_weight,
            regression_target: None,
            regression_samples: 256,
            init_scale: t.init_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifierSection {
    pub max_splits: usize,
    pub timeout: u64,
}

impl Default for VerifierSection {
    fn default() -> Self {
        let l = Limits::default();
        VerifierSection {
            max_splits: l.max_splits,
            timeout: l.timeout.as_secs(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub braking: Q,
    pub control_period: Q,
    pub step: Q,
    pub horizon: Q,
    pub p0: Q,
    pub v0: Q,
    pub v_range: (Q, Q),
    pub p_range: (Q, Q),
    pub stop_braking_at_zero: bool,
    pub sweep_runs: usize,
    pub satisfaction_samples: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimConfig::default();
        SimSection {
            braking: Q(s.braking),
            control_period: Q(s.control_period),
            step: Q(s.step),
            horizon: Q(s.horizon),
            p0: Q(s.p0),
            v0: Q(s.v0),
            v_range: (Q(s.v_range.0), Q(s.v_range.1)),
            p_range: (Q(s.p_range.0), Q(s.p_range.1)),
            stop_braking_at_zero: s.stop_braking_at_zero,
            sweep_runs: 100,
            satisfaction_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToolConfig {
    pub seed: u64,
    pub paths: Paths,
    pub property: Properties,
    pub logic: LogicSection,
    pub train: TrainSection,
    pub verifier: VerifierSection,
    pub sim: SimSection,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base: PathBuf,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            seed: 7,
            paths: Paths::default(),
            property: Properties::default(),
            logic: LogicSection::default(),
            train: TrainSection::default(),
            verifier: VerifierSection::default(),
            sim: SimSection::default(),
            base: PathBuf::from("."),
        }
    }
}

/// Parses the value of a `--set` flag as TOML, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("--set expects section.key=value, got `{assignment}`")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Invalid(format!("bad key `{key}`")));
    }
    let (last, sections) = parts.split_last().expect("nonempty");
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("`{s}` is not a section")))?;
    }
    cur.insert(last.to_string(), override_value(value.trim()));
    Ok(())
}

impl ToolConfig {
    /// Loads `path` (or defaults when `None`) and applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ToolConfig, ConfigError> {
        let (mut table, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                let table: toml::Table = text
                    .parse()
                    .map_err(|e: toml::de::Error| ConfigError::Invalid(format!("{}: {}", p.display(), e.message())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, base)
            }
            None => (toml::Table::new(), PathBuf::from(".")),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ToolConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.message().to_string()))?;
        cfg.base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn required_path(&self, which: &str) -> Result<PathBuf, ConfigError> {
        let p = match which {
            "spec" => &self.paths.spec,
            "network" => &self.paths.network,
            "embedding" => &self.paths.embedding,
            _ => unreachable!("known path keys"),
        };
        let p = p
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid(format!("paths.{which} is not set")))?;
        let full = self.resolve(p);
        if !full.exists() {
            return Err(ConfigError::Invalid(format!("paths.{which}: {} does not exist", full.display())));
        }
        Ok(full)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.paths.output_dir.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn property(&self, which: &str) -> Result<String, ConfigError> {
        let p = match which {
            "train" => &self.property.train,
            "verify" => &self.property.verify,
            "problem" => &self.property.problem,
            _ => unreachable!("known property keys"),
        };
        p.clone()
            .ok_or_else(|| ConfigError::Invalid(format!("property.{which} is not set")))
    }

    pub fn logic_config(&self) -> Result<LogicConfig, ConfigError> {
        let l = &self.logic;
        let logic: Logic = l.logic.parse().map_err(|e| ConfigError::Invalid(format!("logic.logic: {e}")))?;
        let quantifier = match l.quantifier.as_str() {
            "minmax" => QuantSemantics::MinMax,
            "pmean" => QuantSemantics::PMean(l.p),
            other => {
                return Err(ConfigError::Invalid(format!(
                    "logic.quantifier: unknown `{other}` (expected minmax or pmean)"
                )))
            }
        };
        let cfg = LogicConfig {
            logic,
            quantifier,
            tau: l.tau.0.clone(),
            sharp_atoms: l.sharp_atoms,
            lawvere_product: l.lawvere_product,
            samples: l.samples,
            seed: self.seed.wrapping_add(1),
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(format!("logic: {e}")))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let t = &self.train;
        let cfg = TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch: t.batch,
            regression_weight: t.regression_weight,
            seed: self.seed.wrapping_add(1),
            init_scale: t.init_scale,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(format!("train: {e}")))?;
        Ok(cfg)
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_splits: self.verifier.max_splits,
            timeout: Duration::from_secs(self.verifier.timeout),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.sim;
        SimConfig {
            braking: s.braking.0.clone(),
            control_period: s.control_period.0.clone(),
            step: s.step.0.clone(),
            horizon: s.horizon.0.clone(),
            p0: s.p0.0.clone(),
            v0: s.v0.0.clone(),
            v_range: (s.v_range.0 .0.clone(), s.v_range.1 .0.clone()),
            p_range: (s.p_range.0 .0.clone(), s.p_range.1 .0.clone()),
            stop_braking_at_zero: s.stop_braking_at_zero,
        }
    }

    pub fn init_seed(&self) -> u64 {
        self.seed
    }

    pub fn regression_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn sweep_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    pub fn satisfaction_seed(&self) -> u64 {
        self.seed.wrapping_add(4)
    }
}
