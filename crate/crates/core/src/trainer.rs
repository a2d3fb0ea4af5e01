//! Property-driven training by plain full-batch gradient descent.
//!
//! The objective is `λ·regression + (1 − λ)·property`, where the property
//! loss is a compiled [`LossTerm`] whose quantifiers are resampled every
//! epoch.

use crate::dl_logic::{draw_samples, value_and_grad_params, LogicError, LossTerm, Samples};
use crate::network::{Activation, Layer, Network, NetworkError};
use crate::rational::from_f64_exact;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Quantifier samples drawn per epoch.
    pub batch: usize,
    /// Weight λ of the regression term.
    pub regression_weight: f64,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 500,
            batch: 256,
            regression_weight: 0.5,
            seed: 7,
            init_scale: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a non-negative number");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(0.0..=1.0).contains(&self.regression_weight) {
            return bad("regression_weight must lie in [0, 1]");
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be positive");
        }
        Ok(())
    }
}

/// Fresh network with the given layer widths (input first). Hidden layers
/// use ReLU, the last layer is affine. Parameters are uniform in
/// `[-scale, scale]`.
pub fn init_network(widths: &[usize], scale: f64, seed: u64) -> Result<Network, TrainError> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(TrainError::InvalidConfig(
            "architecture needs at least an input and an output width, all positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || from_f64_exact(rng.gen_range(-scale..=scale)).expect("finite");
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let weights = (0..w[1]).map(|_| (0..w[0]).map(|_| draw()).collect()).collect();
            let bias = (0..w[1]).map(|_| draw()).collect();
            let act = if i + 2 == widths.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            Layer::new(weights, bias, act)
        })
        .collect();
    Ok(Network::new(layers)?)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Combined loss at the start of every epoch.
    pub history: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best_loss(&self) -> f64 {
        self.history[self.best_epoch]
    }
}

/// Runs `cfg.epochs` gradient steps and returns the parameters with the
/// lowest recorded combined loss.
pub fn train(
    init: &Network,
    property: &LossTerm,
    regression: Option<&LossTerm>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let shape = init.shape();
    let mut prop_term = property.clone();
    prop_term.config.samples = cfg.batch;
    let lambda = if regression.is_some() { cfg.regression_weight } else { 0.0 };

    let mut theta = init.params_f64();
    let mut best = theta.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0;
    for epoch in 0..cfg.epochs {
        let samples = draw_samples(&prop_term, cfg.seed.wrapping_add(epoch as u64))?;
        let (p_val, p_grad) = value_and_grad_params(&prop_term, &shape, &theta, &samples)?;
        let (r_val, r_grad) = match regression {
            Some(r) => value_and_grad_params(r, &shape, &theta, &Samples::default())?,
            None => (0.0, vec![0.0; theta.len()]),
        };
        let loss = lambda * r_val + (1.0 - lambda) * p_val;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch });
        }
        if history.is_empty() || loss < history[best_epoch] {
            best_epoch = epoch;
            best.clone_from(&theta);
        }
        history.push(loss);
        log::debug!("epoch {epoch}: loss {loss:.6e}");
        for ((t, gp), gr) in theta.iter_mut().zip(&p_grad).zip(&r_grad) {
            *t -= cfg.learning_rate * (lambda * gr + (1.0 - lambda) * gp);
        }
    }
    Ok(TrainOutcome {
        network: init.with_params_f64(&best)?,
        history,
        best_epoch,
    })
}
