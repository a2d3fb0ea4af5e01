//! Feedforward affine+ReLU networks and the affine embedding maps around them.
//!
//! Weights are exact rationals. Evaluation runs either in exact rational
//! arithmetic (no rounding at any step) or in `f64`.
//!
//! File format (numbers are strings so that they stay exact):
//!
//! ```json
//! {"layers": [{"weights": [["1", "0"], ["0", "1"]], "bias": ["0", "0"], "activation": "relu"},
//!             {"weights": [["-1", "-1"]], "bias": ["0"], "activation": "identity"}]}
//! ```

use crate::rational::{format_rational, from_f64_exact, parse_rational, to_f64, Rational};
use num_traits::{Signed, Zero};
use serde_json::{json, Value};
use std::path::Path;
use thiserror::Error;

/// Desk-scale limits; larger networks load with a warning.
pub const MAX_LAYERS: usize = 4;
pub const MAX_NEURONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("format error at {path}: {message}")]
    Format { path: String, message: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("io error: {0}")]
    Io(String),
}

fn format_err(path: impl Into<String>, message: impl Into<String>) -> NetworkError {
    NetworkError::Format {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `rows × cols`: one row per output neuron.
    pub weights: Vec<Vec<Rational>>,
    pub bias: Vec<Rational>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<Rational>>, bias: Vec<Rational>, activation: Activation) -> Self {
        Layer {
            weights,
            bias,
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    /// `W x + b`, exactly.
    pub fn affine(&self, x: &[Rational]) -> Vec<Rational> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).fold(b.clone(), |acc, (w, xi)| acc + w * xi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Float64,
    ExactRational,
}

/// Result of [`Network::eval`] in the requested mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Float(Vec<f64>),
    Exact(Vec<Rational>),
}

impl Values {
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Values::Float(v) => v.clone(),
            Values::Exact(v) => v.iter().map(to_f64).collect(),
        }
    }
}

/// An immutable, validated network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Validates widths, bias lengths and the identity output layer.
    pub fn new(layers: Vec<Layer>) -> Result<Network, NetworkError> {
        if layers.is_empty() {
            return Err(format_err("layers", "at least one layer is required"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.is_empty() || layer.inputs() == 0 {
                return Err(format_err(format!("layers[{i}].weights"), "empty weight matrix"));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != layer.inputs()) {
                return Err(NetworkError::Dimension(format!(
                    "layers[{i}].weights[{r}] has {} entries, expected {}",
                    layer.weights[r].len(),
                    layer.inputs()
                )));
            }
            if layer.bias.len() != layer.outputs() {
                return Err(NetworkError::Dimension(format!(
                    "layers[{i}].bias has {} entries, expected {}",
                    layer.bias.len(),
                    layer.outputs()
                )));
            }
            if i > 0 && layer.inputs() != layers[i - 1].outputs() {
                return Err(NetworkError::Dimension(format!(
                    "layers[{i}] takes {} inputs but layers[{}] produces {}",
                    layer.inputs(),
                    i - 1,
                    layers[i - 1].outputs()
                )));
            }
        }
        let last = layers.len() - 1;
        if layers[last].activation != Activation::Identity {
            return Err(format_err(
                format!("layers[{last}].activation"),
                "the output layer must use the identity activation",
            ));
        }
        let neurons: usize = layers.iter().map(Layer::outputs).sum();
        if layers.len() > MAX_LAYERS || neurons > MAX_NEURONS {
            log::warn!(
                "network with {} layers / {neurons} neurons exceeds desk scale ({MAX_LAYERS} layers, {MAX_NEURONS} neurons)",
                layers.len()
            );
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Widths of the hidden (non-output) layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Layer::outputs).collect()
    }

    fn check_input(&self, len: usize) -> Result<(), NetworkError> {
        if len != self.input_dim() {
            return Err(NetworkError::Dimension(format!(
                "input has {len} entries, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, input: &[Rational], mode: EvalMode) -> Result<Values, NetworkError> {
        match mode {
            EvalMode::ExactRational => self.eval_exact(input).map(Values::Exact),
            EvalMode::Float64 => {
                let x: Vec<f64> = input.iter().map(to_f64).collect();
                self.eval_f64(&x).map(Values::Float)
            }
        }
    }

    pub fn eval_exact(&self, input: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        Ok(self.trace_exact(input)?.pop().expect("at least one layer"))
    }

    /// Post-activation values of every layer, in order; the last entry is
    /// the network output.
    pub fn trace_exact(&self, input: &[Rational]) -> Result<Vec<Vec<Rational>>, NetworkError> {
        self.check_input(input.len())?;
        let mut out = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut z = layer.affine(&x);
            if layer.activation == Activation::Relu {
                for v in &mut z {
                    if v.is_negative() {
                        *v = Rational::zero();
                    }
                }
            }
            out.push(z.clone());
            x = z;
        }
        Ok(out)
    }

    /// Pre-activation values of every layer.
    pub fn pre_activations_exact(&self, input: &[Rational]) -> Result<Vec<Vec<Rational>>, NetworkError> {
        self.check_input(input.len())?;
        let mut out = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let z = layer.affine(&x);
            x = match layer.activation {
                Activation::Relu => z
                    .iter()
                    .map(|v| if v.is_negative() { Rational::zero() } else { v.clone() })
                    .collect(),
                Activation::Identity => z.clone(),
            };
            out.push(z);
        }
        Ok(out)
    }

    pub fn eval_f64(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(input.len())?;
        let params = self.params_f64();
        Ok(eval_params_f64(&self.shape(), &params, input))
    }

    /// Layer shapes `(rows, cols, activation)`.
    pub fn shape(&self) -> Vec<(usize, usize, Activation)> {
        self.layers
            .iter()
            .map(|l| (l.outputs(), l.inputs(), l.activation))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs() * (l.inputs() + 1)).sum()
    }

    /// Parameters in the canonical order: per layer, weights row-major, then bias.
    pub fn params(&self) -> Vec<Rational> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            for row in &l.weights {
                out.extend(row.iter().cloned());
            }
            out.extend(l.bias.iter().cloned());
        }
        out
    }

    pub fn params_f64(&self) -> Vec<f64> {
        self.params().iter().map(to_f64).collect()
    }

    /// Same architecture with new parameters (canonical order).
    pub fn with_params(&self, params: &[Rational]) -> Result<Network, NetworkError> {
        if params.len() != self.param_count() {
            return Err(NetworkError::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().cloned();
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                weights: (0..l.outputs())
                    .map(|_| it.by_ref().take(l.inputs()).collect())
                    .collect(),
                bias: it.by_ref().take(l.outputs()).collect(),
                activation: l.activation,
            })
            .collect();
        Network::new(layers)
    }

    /// Imports float parameters by their exact binary values.
    pub fn with_params_f64(&self, params: &[f64]) -> Result<Network, NetworkError> {
        let exact = params
            .iter()
            .enumerate()
            .map(|(i, &p)| from_f64_exact(p).ok_or_else(|| format_err(format!("params[{i}]"), "non-finite value")))
            .collect::<Result<Vec<_>, _>>()?;
        self.with_params(&exact)
    }

    pub fn to_json(&self) -> Value {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                json!({
                    "weights": l.weights.iter().map(|r| r.iter().map(format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "bias": l.bias.iter().map(format_rational).collect::<Vec<_>>(),
                    "activation": l.activation.name(),
                })
            })
            .collect();
        json!({ "layers": layers })
    }

    /// Canonical serialization: pretty JSON, reduced `n/d` strings.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("json");
        s.push('\n');
        s
    }

    /// Parses the strict format (all numbers as strings).
    pub fn from_json_str(text: &str) -> Result<Network, NetworkError> {
        Self::parse(text, false)
    }

    /// Like [`Network::from_json_str`] but also accepts JSON numbers,
    /// converting each to the exact value of its binary float.
    pub fn from_json_str_trusting_floats(text: &str) -> Result<Network, NetworkError> {
        Self::parse(text, true)
    }

    fn parse(text: &str, trust_floats: bool) -> Result<Network, NetworkError> {
        let root: Value = serde_json::from_str(text).map_err(|e| format_err("$", e.to_string()))?;
        let layers_v = root
            .get("layers")
            .ok_or_else(|| format_err("layers", "missing field"))?
            .as_array()
            .ok_or_else(|| format_err("layers", "expected an array"))?;
        if layers_v.is_empty() {
            return Err(format_err("layers", "at least one layer is required"));
        }
        let mut layers = Vec::with_capacity(layers_v.len());
        for (i, lv) in layers_v.iter().enumerate() {
            let path = format!("layers[{i}]");
            let rows = lv
                .get("weights")
                .and_then(Value::as_array)
                .ok_or_else(|| format_err(format!("{path}.weights"), "expected an array of rows"))?;
            let weights = rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let rpath = format!("{path}.weights[{r}]");
                    let items = row.as_array().ok_or_else(|| format_err(&rpath, "expected an array"))?;
                    items
                        .iter()
                        .enumerate()
                        .map(|(c, v)| number(v, &format!("{rpath}[{c}]"), trust_floats))
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let bias = lv
                .get("bias")
                .and_then(Value::as_array)
                .ok_or_else(|| format_err(format!("{path}.bias"), "expected an array"))?
                .iter()
                .enumerate()
                .map(|(k, v)| number(v, &format!("{path}.bias[{k}]"), trust_floats))
                .collect::<Result<Vec<_>, _>>()?;
            let activation = match lv.get("activation").and_then(Value::as_str) {
                Some("relu") => Activation::Relu,
                Some("identity") => Activation::Identity,
                Some(other) => {
                    return Err(format_err(
                        format!("{path}.activation"),
                        format!("unknown activation `{other}` (expected relu or identity)"),
                    ))
                }
                None => return Err(format_err(format!("{path}.activation"), "expected a string")),
            };
            layers.push(Layer {
                weights,
                bias,
                activation,
            });
        }
        Network::new(layers)
    }
}

fn number(v: &Value, path: &str, trust_floats: bool) -> Result<Rational, NetworkError> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|e| format_err(path, e.to_string())),
        Value::Number(n) if trust_floats => n
            .as_f64()
            .and_then(from_f64_exact)
            .ok_or_else(|| format_err(path, "non-finite number")),
        Value::Number(_) => Err(format_err(
            path,
            "numbers must be strings (use the float-trusting loader to import binary floats)",
        )),
        _ => Err(format_err(path, "expected a rational string")),
    }
}

pub fn load_network(path: &Path) -> Result<Network, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
    Network::from_json_str(&text)
}

/// Float forward pass over a flat parameter vector in canonical order.
pub fn eval_params_f64(shape: &[(usize, usize, Activation)], params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    let mut off = 0;
    for &(rows, cols, act) in shape {
        let w = &params[off..off + rows * cols];
        let b = &params[off + rows * cols..off + rows * cols + rows];
        off += rows * (cols + 1);
        x = (0..rows)
            .map(|r| {
                let z = w[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(&x)
                    .fold(b[r], |acc, (wi, xi)| acc + wi * xi);
                match act {
                    Activation::Relu => z.max(0.0),
                    Activation::Identity => z,
                }
            })
            .collect();
    }
    x
}

/// `x ↦ scale·x + offset` with `scale > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub scale: Rational,
    pub offset: Rational,
}

impl AffineMap {
    pub fn new(scale: Rational, offset: Rational) -> Result<AffineMap, NetworkError> {
        if !scale.is_positive() {
            return Err(format_err("scale", "scale must be strictly positive"));
        }
        Ok(AffineMap { scale, offset })
    }

    pub fn identity() -> AffineMap {
        AffineMap {
            scale: Rational::from_integer(1.into()),
            offset: Rational::zero(),
        }
    }

    /// The map sending `[lo, hi]` onto `[-1, 1]`.
    pub fn normalizing(lo: &Rational, hi: &Rational) -> Result<AffineMap, NetworkError> {
        let two = Rational::from_integer(2.into());
        let width = hi - lo;
        if !width.is_positive() {
            return Err(format_err("range", "range must have positive width"));
        }
        let scale = &two / &width;
        let offset = -(lo + hi) / width;
        AffineMap::new(scale, offset)
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.scale * x + &self.offset
    }

    pub fn invert(&self, y: &Rational) -> Rational {
        (y - &self.offset) / &self.scale
    }
}

/// Embedding `e` (problem input → network input) and unembedding `u`
/// (network output → problem output), both coordinate-wise affine.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpec {
    pub input_map: Vec<AffineMap>,
    pub output_map: Vec<AffineMap>,
}

impl EmbeddingSpec {
    pub fn identity(inputs: usize, outputs: usize) -> EmbeddingSpec {
        EmbeddingSpec {
            input_map: vec![AffineMap::identity(); inputs],
            output_map: vec![AffineMap::identity(); outputs],
        }
    }

    fn apply(maps: &[AffineMap], x: &[Rational], what: &str) -> Result<Vec<Rational>, NetworkError> {
        if maps.len() != x.len() {
            return Err(NetworkError::Dimension(format!(
                "{what} has {} entries, embedding expects {}",
                x.len(),
                maps.len()
            )));
        }
        Ok(maps.iter().zip(x).map(|(m, v)| m.apply(v)).collect())
    }

    pub fn embed(&self, problem_input: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        Self::apply(&self.input_map, problem_input, "problem input")
    }

    pub fn unembed(&self, net_output: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        Self::apply(&self.output_map, net_output, "network output")
    }

    /// Problem-space output value whose embedding is `net_value` in coordinate `k`.
    pub fn output_to_network(&self, k: usize, problem_value: &Rational) -> Rational {
        self.output_map[k].invert(problem_value)
    }

    pub fn to_json_string(&self) -> String {
        let maps = |ms: &[AffineMap]| -> Vec<Value> {
            ms.iter()
                .map(|m| json!({"scale": format_rational(&m.scale), "offset": format_rational(&m.offset)}))
                .collect()
        };
        let mut s = serde_json::to_string_pretty(&json!({
            "input_map": maps(&self.input_map),
            "output_map": maps(&self.output_map),
        }))
        .expect("json");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<EmbeddingSpec, NetworkError> {
        let root: Value = serde_json::from_str(text).map_err(|e| format_err("$", e.to_string()))?;
        let maps = |key: &str| -> Result<Vec<AffineMap>, NetworkError> {
            let arr = root
                .get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| format_err(key, "expected an array"))?;
            if arr.is_empty() {
                return Err(format_err(key, "at least one coordinate map is required"));
            }
            arr.iter()
                .enumerate()
                .map(|(i, m)| {
                    let path = format!("{key}[{i}]");
                    let field = |f: &str| -> Result<Rational, NetworkError> {
                        let v = m.get(f).ok_or_else(|| format_err(format!("{path}.{f}"), "missing field"))?;
                        number(v, &format!("{path}.{f}"), false)
                    };
                    let scale = field("scale")?;
                    let offset = field("offset")?;
                    AffineMap::new(scale, offset).map_err(|_| {
                        format_err(format!("{path}.scale"), "scale must be strictly positive")
                    })
                })
                .collect()
        };
        Ok(EmbeddingSpec {
            input_map: maps("input_map")?,
            output_map: maps("output_map")?,
        })
    }
}

pub fn load_embedding(path: &Path) -> Result<EmbeddingSpec, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
    EmbeddingSpec::from_json_str(&text)
}

/// `u ∘ f ∘ e` on a problem-space input.
pub fn eval_solution(
    net: &Network,
    emb: &EmbeddingSpec,
    problem_input: &[Rational],
    mode: EvalMode,
) -> Result<Vec<Rational>, NetworkError> {
    let x = emb.embed(problem_input)?;
    if emb.output_map.len() != net.output_dim() {
        return Err(NetworkError::Dimension(format!(
            "embedding has {} output maps, network has {} outputs",
            emb.output_map.len(),
            net.output_dim()
        )));
    }
    let y = match net.eval(&x, mode)? {
        Values::Exact(v) => v,
        Values::Float(v) => v
            .iter()
            .map(|&f| from_f64_exact(f).ok_or_else(|| NetworkError::Dimension("non-finite output".into())))
            .collect::<Result<_, _>>()?,
    };
    emb.unembed(&y)
}
