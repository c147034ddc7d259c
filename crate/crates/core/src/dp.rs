//! Per-sample clipping rules and the Gaussian privatization step.
//!
//! A private gradient is `sum_i C_i g_i + s * z` where `C_i` comes from the
//! clipping rule, `z ~ N(0, I)` is drawn from the step's noise stream and
//! `s = sigma * sensitivity`. The unit draw `z` is independent of the rule,
//! so runs that differ only in their clipping see identical noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gaussian_vector, group_norms, norm, LayerPartition, Matrix, RngStream, Vector};

/// Per-sample clipping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ClipRule {
    /// `min(R / |g|, 1)`
    Abadi { r: f64 },
    /// `min(1 / |g|, 1 / R)`; sensitivity 1.
    ReParam { r: f64 },
    /// `1` if `|g| < R`, else `0`.
    Global { r: f64 },
    /// `R / |g|`, and `0` for a zero gradient.
    AutoV { r: f64 },
    /// `R / (|g| + gamma)`
    AutoS { r: f64, gamma: f64 },
    /// `1 / (|g| + gamma)`
    AutoSFree { gamma: f64 },
}

impl ClipRule {
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            ClipRule::Abadi { r }
            | ClipRule::ReParam { r }
            | ClipRule::Global { r }
            | ClipRule::AutoV { r }
            | ClipRule::AutoS { r, .. } => Some(r),
            ClipRule::AutoSFree { .. } => None,
        }
    }

    /// Largest possible norm of a clipped per-sample gradient.
    pub fn sensitivity(&self) -> f64 {
        match *self {
            ClipRule::ReParam { .. } | ClipRule::AutoSFree { .. } => 1.0,
            ClipRule::Abadi { r } | ClipRule::Global { r } | ClipRule::AutoV { r } | ClipRule::AutoS { r, .. } => r,
        }
    }

    /// Same rule shape with its threshold replaced.
    pub fn with_threshold(&self, r: f64) -> Result<ClipRule> {
        Ok(match *self {
            ClipRule::Abadi { .. } => ClipRule::Abadi { r },
            ClipRule::ReParam { .. } => ClipRule::ReParam { r },
            ClipRule::Global { .. } => ClipRule::Global { r },
            ClipRule::AutoV { .. } => ClipRule::AutoV { r },
            ClipRule::AutoS { gamma, .. } => ClipRule::AutoS { r, gamma },
            ClipRule::AutoSFree { .. } => return Err(Error::invalid("the R-free AUTO-S rule has no threshold to replace")),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.threshold() {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::invalid(format!("clipping threshold must be > 0, got {r}")));
            }
        }
        match *self {
            ClipRule::AutoS { gamma, .. } | ClipRule::AutoSFree { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(Error::invalid(format!("stability constant must be > 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

/// Per-sample clipping factor `C` for a gradient of norm `norm`.
pub fn clip_factor(rule: &ClipRule, norm: f64) -> f64 {
    match *rule {
        ClipRule::Abadi { r } => {
            if norm > r {
                r / norm
            } else {
                1.0
            }
        }
        ClipRule::ReParam { r } => {
            if norm > r {
                1.0 / norm
            } else {
                1.0 / r
            }
        }
        ClipRule::Global { r } => f64::from(u8::from(norm < r)),
        ClipRule::AutoV { r } => {
            if norm > 0.0 {
                r / norm
            } else {
                0.0
            }
        }
        ClipRule::AutoS { r, gamma } => r / (norm + gamma),
        ClipRule::AutoSFree { gamma } => 1.0 / (norm + gamma),
    }
}

/// Per-layer thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    Explicit(Vec<f64>),
    /// Total threshold `R`, split as `R / sqrt(L)` per layer.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LayerMode {
    #[default]
    AllLayer,
    PerLayer {
        partition: LayerPartition,
        thresholds: Thresholds,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipPolicy {
    #[serde(flatten)]
    pub rule: ClipRule,
    #[serde(default)]
    pub layers: LayerMode,
}

impl From<ClipRule> for ClipPolicy {
    fn from(rule: ClipRule) -> Self {
        ClipPolicy { rule, layers: LayerMode::AllLayer }
    }
}

impl ClipPolicy {
    pub fn abadi(r: f64) -> Self {
        ClipRule::Abadi { r }.into()
    }

    pub fn auto_v(r: f64) -> Self {
        ClipRule::AutoV { r }.into()
    }

    pub fn auto_s(r: f64, gamma: f64) -> Self {
        ClipRule::AutoS { r, gamma }.into()
    }

    pub fn auto_s_free(gamma: f64) -> Self {
        ClipRule::AutoSFree { gamma }.into()
    }

    /// Per-layer clipping with the rule's shape applied blockwise.
    pub fn per_layer(rule: ClipRule, partition: LayerPartition, thresholds: Thresholds) -> Result<Self> {
        let p = ClipPolicy { rule, layers: LayerMode::PerLayer { partition, thresholds } };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if let LayerMode::PerLayer { partition, thresholds } = &self.layers {
            if matches!(self.rule, ClipRule::AutoSFree { .. }) {
                return Err(Error::invalid("per-layer clipping needs a thresholded rule"));
            }
            let rs = expand_thresholds(thresholds, partition.len())?;
            for r in rs {
                self.rule.with_threshold(r)?.validate()?;
            }
        }
        Ok(())
    }

    /// Layer thresholds, when clipping per layer.
    pub fn layer_thresholds(&self) -> Result<Option<Vec<f64>>> {
        match &self.layers {
            LayerMode::AllLayer => Ok(None),
            LayerMode::PerLayer { partition, thresholds } => expand_thresholds(thresholds, partition.len()).map(Some),
        }
    }

    /// l2 sensitivity of one clipped per-sample gradient.
    pub fn sensitivity(&self) -> Result<f64> {
        Ok(match self.layer_thresholds()? {
            None => self.rule.sensitivity(),
            Some(rs) => rs.iter().map(|&r| self.rule.with_threshold(r).map(|x| x.sensitivity().powi(2))).sum::<Result<f64>>()?.sqrt(),
        })
    }

    /// Norm above which Abadi's clipping would be active; the clip-fraction cutoff.
    pub fn reference_threshold(&self) -> Result<f64> {
        Ok(match self.layer_thresholds()? {
            None => self.rule.threshold().unwrap_or(1.0),
            Some(rs) => rs.iter().map(|r| r * r).sum::<f64>().sqrt(),
        })
    }
}

fn expand_thresholds(t: &Thresholds, layers: usize) -> Result<Vec<f64>> {
    match t {
        Thresholds::Uniform(r) => Ok(vec![r / (layers as f64).sqrt(); layers]),
        Thresholds::Explicit(rs) if rs.len() == layers => {
            if rs.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                return Err(Error::invalid("layer thresholds must all be > 0"));
            }
            Ok(rs.clone())
        }
        Thresholds::Explicit(rs) => Err(Error::invalid(format!("{} thresholds given for {layers} layers", rs.len()))),
    }
}

/// Clipped sum with its per-sample factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedSum {
    pub sum: Vector,
    /// Effective factor `|C_i g_i| / |g_i|` per sample (the rule's factor in all-layer mode).
    pub factors: Vec<f64>,
    pub clip_fraction: f64,
}

/// `sum_i C_i g_i` over the rows of `grads`.
pub fn clip_and_sum(policy: &ClipPolicy, grads: &Matrix) -> Result<ClippedSum> {
    if grads.rows() == 0 {
        return Err(Error::invalid("clip_and_sum needs at least one per-sample gradient"));
    }
    policy.validate()?;
    let d = grads.cols();
    let cutoff = policy.reference_threshold()?;
    let mut sum = Vector::zeros(d);
    let mut factors = Vec::with_capacity(grads.rows());
    let mut clipped = 0usize;
    match &policy.layers {
        LayerMode::AllLayer => {
            for g in grads.iter_rows() {
                let n = norm(g);
                let c = clip_factor(&policy.rule, n);
                sum.axpy(c, g);
                factors.push(c);
                clipped += usize::from(n > cutoff);
            }
        }
        LayerMode::PerLayer { partition, thresholds } => {
            partition.check_dim(d)?;
            let rules = expand_thresholds(thresholds, partition.len())?
                .into_iter()
                .map(|r| policy.rule.with_threshold(r))
                .collect::<Result<Vec<_>>>()?;
            for g in grads.iter_rows() {
                let norms = group_norms(g, partition)?;
                let mut clipped_sq = 0.0;
                for ((range, rule), n) in partition.ranges().iter().zip(&rules).zip(&norms) {
                    let c = clip_factor(rule, *n);
                    for (s, v) in sum[range.clone()].iter_mut().zip(&g[range.clone()]) {
                        *s += c * v;
                    }
                    clipped_sq += (c * n).powi(2);
                }
                let total = norms.iter().map(|n| n * n).sum::<f64>().sqrt();
                factors.push(if total > 0.0 { clipped_sq.sqrt() / total } else { 0.0 });
                clipped += usize::from(total > cutoff);
            }
        }
    }
    Ok(ClippedSum { sum, factors, clip_fraction: clipped as f64 / grads.rows() as f64 })
}

/// Privatized gradient for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivatizedGrad {
    pub grad: Vector,
    pub clip_factors: Vec<f64>,
    pub clip_fraction: f64,
    pub noise_std_used: f64,
}

/// Clip, sum and add `sigma * sensitivity * z` with `z` drawn from `rng`.
///
/// An empty batch yields pure noise.
pub fn privatize(policy: &ClipPolicy, grads: &Matrix, sigma: f64, rng: &RngStream) -> Result<PrivatizedGrad> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("noise multiplier must be >= 0, got {sigma}")));
    }
    let d = grads.cols();
    let ClippedSum { mut sum, factors, clip_fraction } = if grads.rows() == 0 {
        policy.validate()?;
        ClippedSum { sum: Vector::zeros(d), factors: Vec::new(), clip_fraction: 0.0 }
    } else {
        clip_and_sum(policy, grads)?
    };
    let noise_std = sigma * policy.sensitivity()?;
    if noise_std > 0.0 {
        let z = gaussian_vector(rng, d, 1.0)?;
        sum.axpy(noise_std, &z);
    }
    Ok(PrivatizedGrad { grad: sum, clip_factors: factors, clip_fraction, noise_std_used: noise_std })
}

/// `sigma * sqrt(sum_k R_k^2) / R_l` for each layer.
pub fn noise_to_signal(thresholds: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if thresholds.is_empty() || thresholds.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("layer thresholds must be non-empty and > 0"));
    }
    let total = thresholds.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(thresholds.iter().map(|r| sigma * total / r).collect())
}
