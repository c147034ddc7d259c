//! First-order update rules applied to a privatized gradient.
//!
//! Weight decay is either coupled (`lambda * w` added to the gradient before
//! the rule sees it) or decoupled (`w -= lr * lambda * w` applied beside the
//! rule). [`OptimizerKind::AdamW`] is always decoupled.

mod equivalence;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Vector;

pub use equivalence::{abadi_control_run, equivalence_pair_run, pair_run, EquivalenceFixture, PairSide, PairTolerance};
pub use trainer::{DpTrainer, StepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    HeavyBall,
    Nag,
    AdaGrad,
    Adam,
    AdamW,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Sgd,
        OptimizerKind::HeavyBall,
        OptimizerKind::Nag,
        OptimizerKind::AdaGrad,
        OptimizerKind::Adam,
        OptimizerKind::AdamW,
    ];

    /// Adaptive rules divide by a running gradient magnitude.
    pub fn is_adaptive(self) -> bool {
        matches!(self, OptimizerKind::AdaGrad | OptimizerKind::Adam | OptimizerKind::AdamW)
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::HeavyBall => "heavyball",
            OptimizerKind::Nag => "nag",
            OptimizerKind::AdaGrad => "adagrad",
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamW => "adamw",
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown optimizer {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Momentum for HeavyBall and NAG.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub decoupled_wd: bool,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        OptimizerConfig {
            kind,
            lr,
            weight_decay: 0.0,
            momentum: default_momentum(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            decoupled_wd: kind == OptimizerKind::AdamW,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn with_weight_decay(mut self, lambda: f64) -> Self {
        self.weight_decay = lambda;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn is_decoupled(&self) -> bool {
        self.decoupled_wd || self.kind == OptimizerKind::AdamW
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        for (name, b) in [("momentum", self.momentum), ("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Mutable buffers for one optimizer instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub t: u64,
    /// First moment (Adam family) or momentum buffer (HeavyBall, NAG).
    pub m: Vector,
    /// Second moment (Adam family) or squared-gradient sum (AdaGrad).
    pub v: Vector,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, dim: usize) -> Self {
        OptimizerState { kind, t: 0, m: Vector::zeros(dim), v: Vector::zeros(dim) }
    }
}

/// Applies one update to `w` in place.
pub fn step(config: &OptimizerConfig, state: &mut OptimizerState, w: &mut [f64], grad: &[f64]) -> Result<()> {
    config.validate()?;
    if state.kind != config.kind {
        return Err(Error::InvalidState(format!("state belongs to {} but config is {}", state.kind, config.kind)));
    }
    let d = w.len();
    if grad.len() != d || state.m.len() != d || state.v.len() != d {
        return Err(Error::InvalidState(format!(
            "dimension mismatch: w {d}, grad {}, buffers {}/{}",
            grad.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    state.t += 1;
    let lr = config.lr;
    let lambda = config.weight_decay;
    let decoupled = config.is_decoupled();
    let t = state.t as i32;
    let (bc1, bc2) = (1.0 - config.beta1.powi(t), 1.0 - config.beta2.powi(t));
    for i in 0..d {
        let g = if decoupled { grad[i] } else { grad[i] + lambda * w[i] };
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let delta = match config.kind {
            OptimizerKind::Sgd => g,
            OptimizerKind::HeavyBall => {
                *m = config.momentum * *m + g;
                *m
            }
            OptimizerKind::Nag => {
                *m = config.momentum * *m + g;
                g + config.momentum * *m
            }
            OptimizerKind::AdaGrad => {
                *v += g * g;
                g / (v.sqrt() + config.eps)
            }
            OptimizerKind::Adam | OptimizerKind::AdamW => {
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                (*m / bc1) / ((*v / bc2).sqrt() + config.eps)
            }
        };
        let decay = if decoupled { lr * lambda * w[i] } else { 0.0 };
        w[i] -= lr * delta + decay;
    }
    Ok(())
}

/// Config plus state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub state: OptimizerState,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer { config, state: OptimizerState::new(config.kind, dim) })
    }

    pub fn step(&mut self, w: &mut [f64], grad: &[f64]) -> Result<()> {
        step(&self.config, &mut self.state, w, grad)
    }
}
