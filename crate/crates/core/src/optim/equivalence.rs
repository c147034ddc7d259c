//! Paired training runs that check when clipping threshold and learning
//! rate are interchangeable.
//!
//! Both runs share data, batches and unit noise; only the policy and the
//! optimizer hyperparameters differ. The result is the largest relative
//! max-norm gap between the two parameter trajectories.

use crate::dp::ClipPolicy;
use crate::error::Result;
use crate::models::{gen_synthetic, SyntheticKind};
use crate::models::{Dataset, ModelSpec};

use super::{DpTrainer, OptimizerConfig, OptimizerKind};

/// Model, data and mechanism shared by both runs of a pair.
#[derive(Debug, Clone)]
pub struct EquivalenceFixture {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub sample_rate: f64,
    pub sigma: f64,
}

impl EquivalenceFixture {
    /// Logistic regression on a small 5-d two-Gaussian problem.
    pub fn logistic(seed: u64) -> Result<Self> {
        Ok(EquivalenceFixture {
            spec: ModelSpec::logistic(5),
            data: gen_synthetic(SyntheticKind::Gauss2Class, seed, 64, 5, &[0.5])?,
            sample_rate: 0.25,
            sigma: 1.0,
        })
    }
}

/// One side of a paired run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSide {
    pub policy: ClipPolicy,
    pub optimizer: OptimizerConfig,
}

/// Acceptance tolerance for a pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTolerance;

impl PairTolerance {
    pub fn for_kind(kind: OptimizerKind) -> f64 {
        if kind.is_adaptive() {
            1e-6
        } else {
            1e-9
        }
    }
}

/// Largest relative gap `|w_a - w_b|_inf / max(|w_a|_inf, |w_b|_inf)` over `steps` steps.
pub fn pair_run(fixture: &EquivalenceFixture, a: &PairSide, b: &PairSide, steps: usize, seed: u64) -> Result<f64> {
    let f = fixture;
    let mut ta = DpTrainer::new(&f.spec, &f.data, a.policy.clone(), a.optimizer, f.sigma, f.sample_rate, seed)?;
    let mut tb = DpTrainer::new(&f.spec, &f.data, b.policy.clone(), b.optimizer, f.sigma, f.sample_rate, seed)?;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        ta.step()?;
        tb.step()?;
        let (wa, wb) = (ta.params(), tb.params());
        let gap = wa.iter().zip(wb.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = wa.max_abs().max(wb.max_abs());
        let rel = if gap == 0.0 {
            0.0
        } else if scale == 0.0 {
            f64::INFINITY
        } else {
            gap / scale
        };
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Hyperparameters for side `b` when its clipped gradients are `1/k` times side `a`'s.
fn rescaled(config: &OptimizerConfig, k: f64) -> OptimizerConfig {
    let mut out = *config;
    if !config.kind.is_adaptive() {
        out.lr = config.lr * k;
        out.weight_decay = config.weight_decay / k;
    } else if !config.is_decoupled() {
        out.weight_decay = config.weight_decay / k;
    }
    out
}

/// AUTO-S with threshold `r` and `(lr, lambda)` against R-free AUTO-S with
/// the rescaled hyperparameters: `(lr * r, lambda / r)` for non-adaptive
/// rules, `(lr, lambda / r)` for adaptive rules with coupled decay and
/// `(lr, lambda)` for decoupled decay.
#[allow(clippy::too_many_arguments)]
pub fn equivalence_pair_run(
    kind: OptimizerKind,
    steps: usize,
    seed: u64,
    r: f64,
    lr: f64,
    lambda: f64,
    gamma: f64,
    fixture: &EquivalenceFixture,
) -> Result<f64> {
    let config = OptimizerConfig::new(kind, lr).with_weight_decay(lambda).with_eps(1e-12);
    let a = PairSide { policy: ClipPolicy::auto_s(r, gamma), optimizer: config };
    let b = PairSide { policy: ClipPolicy::auto_s_free(gamma), optimizer: rescaled(&config, r) };
    pair_run(fixture, &a, &b, steps, seed)
}

/// The same rescaling applied to Abadi clipping at thresholds `r` and `r_prime`.
///
/// Samples below the threshold are not rescaled by the clipping, so the
/// trajectories drift apart whenever some gradients go unclipped.
#[allow(clippy::too_many_arguments)]
pub fn abadi_control_run(
    kind: OptimizerKind,
    steps: usize,
    seed: u64,
    r: f64,
    r_prime: f64,
    lr: f64,
    lambda: f64,
    fixture: &EquivalenceFixture,
) -> Result<f64> {
    let config = OptimizerConfig::new(kind, lr).with_weight_decay(lambda).with_eps(1e-12);
    let a = PairSide { policy: ClipPolicy::abadi(r), optimizer: config };
    let b = PairSide { policy: ClipPolicy::abadi(r_prime), optimizer: rescaled(&config, r / r_prime) };
    pair_run(fixture, &a, &b, steps, seed)
}
