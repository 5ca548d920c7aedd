//! Online training of the output coefficients at one parameter value.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::pde::ParameterPoint;
use crate::{Error, Result};

use super::GptModel;

/// Update rule for the coefficient vector.
pub trait OnlineOptimizer: fmt::Debug + Send {
    fn name(&self) -> &'static str;
    fn step(&mut self, c: &mut [f64], grad: &[f64], lr: f64) -> Result<()>;
}

/// `c ← c − δ ∇L`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainGd;

impl OnlineOptimizer for PlainGd {
    fn name(&self) -> &'static str {
        "plain-gd"
    }

    fn step(&mut self, c: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        for (ci, g) in c.iter_mut().zip(grad) {
            *ci -= lr * g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OnlineAdam(AdamState);

impl OnlineOptimizer for OnlineAdam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, c: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        self.0.step(c, grad, lr)
    }
}

type OptimizerFactory = fn(usize) -> Box<dyn OnlineOptimizer>;

const OPTIMIZERS: &[(&str, OptimizerFactory)] = &[
    ("plain-gd", |_| Box::new(PlainGd)),
    ("adam", |n| Box::new(OnlineAdam(AdamState::new(n)))),
];

pub fn optimizer_names() -> Vec<&'static str> {
    OPTIMIZERS.iter().map(|(n, _)| *n).collect()
}

/// A fresh optimizer for `n` coefficients.
pub fn online_optimizer(name: &str, n: usize) -> Result<Box<dyn OnlineOptimizer>> {
    OPTIMIZERS
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, f)| f(n))
        .ok_or_else(|| Error::Unknown {
            kind: "online optimizer",
            name: name.to_owned(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub lr: f64,
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
}

fn default_optimizer() -> String {
    "plain-gd".to_owned()
}

impl OnlineConfig {
    pub fn new(lr: f64, epochs: usize) -> Self {
        Self {
            lr,
            epochs,
            optimizer: default_optimizer(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidLearningRate(self.lr));
        }
        online_optimizer(&self.optimizer, 0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineResult {
    pub c: Vec<f64>,
    /// Reduced loss at `c`: the error indicator.
    pub delta: f64,
    pub epochs: usize,
    pub wall_time: f64,
}

/// Train `c` from `c0`; `trace` receives the loss before every update.
pub fn online_train_traced(
    model: &GptModel,
    mu: &ParameterPoint,
    c0: &[f64],
    config: &OnlineConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<OnlineResult> {
    config.validate()?;
    let start = Instant::now();
    let mut opt = online_optimizer(&config.optimizer, c0.len())?;
    let mut c = c0.to_vec();
    let mut last = f64::NAN;
    for epoch in 0..config.epochs {
        let (loss, grad) = model.gpt_loss_grad(&c, mu)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::OnlineDivergence {
                epoch,
                last_delta: last,
            });
        }
        last = loss;
        if let Some(t) = trace.as_deref_mut() {
            t.push(loss);
        }
        opt.step(&mut c, &grad, config.lr)?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::OnlineDivergence {
                epoch,
                last_delta: last,
            });
        }
    }
    let delta = model.gpt_loss(&c, mu)?;
    if !delta.is_finite() {
        return Err(Error::OnlineDivergence {
            epoch: config.epochs,
            last_delta: last,
        });
    }
    Ok(OnlineResult {
        c,
        delta,
        epochs: config.epochs,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Train `c` from `c0` with the configured rule and return the indicator.
pub fn online_train(
    model: &GptModel,
    mu: &ParameterPoint,
    c0: &[f64],
    config: &OnlineConfig,
) -> Result<OnlineResult> {
    online_train_traced(model, mu, c0, config, None)
}

/// Inverse-distance weighting of the canonical vectors of the
/// `min(2^d, N)` sampled parameters closest to `mu` (ties by index).
pub fn init_coeffs(mu: &ParameterPoint, sampled: &[ParameterPoint]) -> Vec<f64> {
    let n = sampled.len();
    let mut c = vec![0.0; n];
    if n == 0 {
        return c;
    }
    if let Some(j) = sampled.iter().position(|s| s.distance(mu) == 0.0) {
        c[j] = 1.0;
        return c;
    }
    let k = 1usize
        .checked_shl(mu.dim() as u32)
        .unwrap_or(usize::MAX)
        .min(n);
    let mut order: Vec<(f64, usize)> = sampled
        .iter()
        .enumerate()
        .map(|(j, s)| (s.distance(mu), j))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near = &order[..k];
    let total: f64 = near.iter().map(|(d, _)| 1.0 / d).sum();
    for &(d, j) in near {
        c[j] = (1.0 / d) / total;
    }
    c
}
