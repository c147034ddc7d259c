//! Batch gradients of one-parameter problems under each clipping rule.
//!
//! Scale-invariant clipping sums per-sample gradients of opposite sign with
//! equal weight, so wherever the two classes balance the clipped update
//! vanishes even though the true gradient does not.

use serde::{Deserialize, Serialize};

use crate::dp::{clip_and_sum, ClipPolicy};
use crate::error::{Error, Result};
use crate::models::{gen_synthetic, per_sample_gradients, Dataset, ModelSpec, SyntheticKind};

use super::output::CsvTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LazySetting {
    /// Intercept-only logistic regression on `x ~ N(y, 1)`.
    Logistic,
    /// Mean estimation on the mixture `N(-4, 1)`, `N(4, 1)`.
    Mean,
}

impl std::str::FromStr for LazySetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(LazySetting::Logistic),
            "mean" => Ok(LazySetting::Mean),
            _ => Err(Error::invalid(format!("unknown setting {s:?}; expected logistic or mean"))),
        }
    }
}

impl LazySetting {
    pub const SAMPLES_PER_CLASS: usize = 10_000;

    pub fn default_r(self) -> f64 {
        0.01
    }

    pub fn default_gamma(self) -> f64 {
        match self {
            LazySetting::Logistic => 0.01,
            LazySetting::Mean => 0.1,
        }
    }

    pub fn model(self) -> ModelSpec {
        match self {
            LazySetting::Logistic => ModelSpec::logistic_1d(),
            LazySetting::Mean => ModelSpec::linear(0),
        }
    }

    pub fn dataset(self, seed: u64) -> Result<Dataset> {
        let kind = match self {
            LazySetting::Logistic => SyntheticKind::LogisticLazy,
            LazySetting::Mean => SyntheticKind::MeanEst,
        };
        gen_synthetic(kind, seed, Self::SAMPLES_PER_CLASS, 1, &[])
    }
}

/// Batch-summed gradients at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LazyRow {
    pub theta: f64,
    pub standard: f64,
    pub abadi: f64,
    pub auto_v: f64,
    pub auto_s: f64,
}

impl LazyRow {
    /// Clipped columns divided by `r`, the scale at which they compare with the
    /// unclipped sum under a learning rate rescaled by `1/r`.
    pub fn per_unit_threshold(&self, r: f64) -> LazyRow {
        LazyRow { theta: self.theta, standard: self.standard, abadi: self.abadi / r, auto_v: self.auto_v / r, auto_s: self.auto_s / r }
    }
}

/// Sums of unclipped, Abadi, AUTO-V and AUTO-S per-sample gradients at `theta`.
pub fn lazy_gradients(setting: LazySetting, data: &Dataset, theta: f64, r: f64, gamma: f64) -> Result<LazyRow> {
    let grads = per_sample_gradients(&setting.model(), &[theta], data)?;
    let sum = |p: ClipPolicy| clip_and_sum(&p, &grads).map(|c| c.sum[0]);
    Ok(LazyRow {
        theta,
        standard: grads.column_sum()[0],
        abadi: sum(ClipPolicy::abadi(r))?,
        auto_v: sum(ClipPolicy::auto_v(r))?,
        auto_s: sum(ClipPolicy::auto_s(r, gamma))?,
    })
}

/// `points` evenly spaced values from `lo` to `hi`; endpoints exact.
pub fn theta_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if points < 11 {
        return Err(Error::invalid(format!("grid resolution must be >= 11, got {points}")));
    }
    if !(hi > lo) {
        return Err(Error::invalid("theta range must be increasing"));
    }
    Ok((0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect())
}

pub fn lazy_region(setting: LazySetting, r: f64, gamma: f64, thetas: &[f64], seed: u64) -> Result<Vec<LazyRow>> {
    let data = setting.dataset(seed)?;
    thetas.iter().map(|&t| lazy_gradients(setting, &data, t, r, gamma)).collect()
}

/// CSV with the clipped columns on the per-unit-threshold scale.
pub fn lazy_table(rows: &[LazyRow], setting: LazySetting, r: f64, gamma: f64) -> CsvTable {
    let mut t = CsvTable::new(["theta", "standard", "abadi", "auto_v", "auto_s"]).with_comment(format!(
        "setting={setting:?} R={r} gamma={gamma}; columns are batch SUMS of per-sample gradients; \
         abadi, auto_v and auto_s are divided by R"
    ));
    for row in rows {
        let n = row.per_unit_threshold(r);
        t.push_floats(&[n.theta, n.standard, n.abadi, n.auto_v, n.auto_s]);
    }
    t
}
