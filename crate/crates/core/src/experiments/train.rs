//! Configured private training runs and their manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::accountant::{calibrate_sigma, epsilon, gdp_epsilon, gdp_mu, AccountantMethod, PrivacySpec};
use crate::dp::ClipPolicy;
use crate::error::{Error, Result};
use crate::models::{accuracy, mean_loss, Dataset, ModelSpec};
use crate::optim::{DpTrainer, OptimizerConfig};

use super::data::DatasetSource;
use super::output::{format_float, write_json, CsvTable};

/// Either a target budget (noise calibrated up front) or an explicit noise multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub delta: f64,
    #[serde(default)]
    pub method: AccountantMethod,
}

impl PrivacyConfig {
    pub fn budget(eps: f64, delta: f64) -> Self {
        PrivacyConfig { eps: Some(eps), sigma: None, delta, method: AccountantMethod::Rdp }
    }

    pub fn noise(sigma: f64, delta: f64) -> Self {
        PrivacyConfig { eps: None, sigma: Some(sigma), delta, method: AccountantMethod::Rdp }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: String,
    pub model: ModelSpec,
    pub dataset: DatasetSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<DatasetSource>,
    pub policy: ClipPolicy,
    pub optimizer: OptimizerConfig,
    pub privacy: PrivacyConfig,
    /// Expected batch size; the sampling rate is `batch_size / n`.
    pub batch_size: f64,
    pub epochs: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
    }

    /// `(sample rate, steps)` for a training set of size `n`.
    pub fn schedule(&self, n: usize) -> Result<(f64, u64)> {
        if !(self.batch_size >= 1.0 && self.batch_size <= n as f64) {
            return Err(Error::invalid(format!("batch size {} must lie in [1, n = {n}]", self.batch_size)));
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return Err(Error::invalid(format!("epochs must be > 0, got {}", self.epochs)));
        }
        let p = self.batch_size / n as f64;
        Ok((p, ((self.epochs / p).round() as u64).max(1)))
    }
}

/// Per-step log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub grad_norm_mean: f64,
    pub clip_fraction: f64,
    pub sigma: f64,
    pub eps_spent_gdp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub version: String,
    pub sigma: f64,
    pub sample_rate: f64,
    pub steps: u64,
    /// Epsilon under the configured accountant after all steps.
    pub eps_spent: f64,
    pub warnings: Vec<String>,
    pub log: Vec<StepLog>,
    pub final_metrics: FinalMetrics,
    pub params: Vec<f64>,
    pub wall_time_s: f64,
}

pub const METRICS_HEADER: [&str; 7] = ["step", "loss", "accuracy", "grad_norm_mean", "clip_fraction", "sigma", "eps_spent_gdp"];

fn eval(spec: &ModelSpec, w: &[f64], data: &Dataset) -> Result<(f64, Option<f64>)> {
    let loss = mean_loss(spec, w, data)?;
    let acc = if spec.is_classification() { Some(accuracy(spec, w, data)?) } else { None };
    Ok((loss, acc))
}

fn gdp_running(sigma: f64, p: f64, t: u64, delta: f64) -> f64 {
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    gdp_mu(sigma, p, t).and_then(|mu| gdp_epsilon(mu, delta)).unwrap_or(f64::NAN)
}

/// Runs a configured training job in memory.
pub fn run_training(config: &RunConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let train = config.dataset.load()?;
    let test = config.test_dataset.as_ref().map(DatasetSource::load).transpose()?;
    train.validate_for(&config.model)?;
    if let Some(t) = &test {
        t.validate_for(&config.model)?;
    }
    let (p, steps) = config.schedule(train.len())?;
    let pc = &config.privacy;
    let mut warnings = Vec::new();
    let sigma = match (pc.eps, pc.sigma) {
        (Some(eps), None) => {
            let spec = PrivacySpec::new(eps, pc.delta, p, steps)?;
            warnings.extend(spec.delta_warning(train.len()));
            calibrate_sigma(&spec, pc.method)?
        }
        (None, Some(s)) if s >= 0.0 && s.is_finite() => s,
        (None, Some(s)) => return Err(Error::invalid(format!("sigma must be >= 0, got {s}"))),
        _ => return Err(Error::invalid("privacy config needs exactly one of eps or sigma")),
    };
    let eps_spent = if sigma > 0.0 { epsilon(pc.method, sigma, p, steps, pc.delta)? } else { f64::INFINITY };
    let mut trainer = DpTrainer::new(&config.model, &train, config.policy.clone(), config.optimizer, sigma, p, config.seed)?;
    let mut log = Vec::with_capacity(steps as usize);
    for t in 1..=steps {
        let r = trainer.step()?;
        log.push(StepLog {
            step: r.step,
            loss: r.loss,
            accuracy: r.accuracy,
            grad_norm_mean: r.grad_norm_mean,
            clip_fraction: r.clip_fraction,
            sigma,
            eps_spent_gdp: gdp_running(sigma, p, t, pc.delta),
        });
    }
    let w = trainer.params().clone();
    let (train_loss, train_accuracy) = eval(&config.model, &w, &train)?;
    let (test_loss, test_accuracy) = match &test {
        Some(t) => {
            let (l, a) = eval(&config.model, &w, t)?;
            (Some(l), a)
        }
        None => (None, None),
    };
    if !train_loss.is_finite() {
        return Err(Error::NumericAbort { step: steps as usize, message: format!("final training loss is {train_loss}") });
    }
    Ok(RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        sigma,
        sample_rate: p,
        steps,
        eps_spent,
        warnings,
        log,
        final_metrics: FinalMetrics { train_loss, train_accuracy, test_loss, test_accuracy },
        params: w.into_inner(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Metrics table: one row per step plus a closing `final` row with held-out
/// (or, without a test set, training) loss and accuracy.
pub fn metrics_table(m: &RunManifest) -> CsvTable {
    let mut t = CsvTable::new(METRICS_HEADER);
    for s in &m.log {
        t.push(vec![
            s.step.to_string(),
            opt_float(s.loss),
            opt_float(s.accuracy),
            format_float(s.grad_norm_mean),
            format_float(s.clip_fraction),
            format_float(s.sigma),
            format_float(s.eps_spent_gdp),
        ]);
    }
    let f = &m.final_metrics;
    let (loss, acc) = match f.test_loss {
        Some(l) => (Some(l), f.test_accuracy),
        None => (Some(f.train_loss), f.train_accuracy),
    };
    let eps = m.log.last().map_or(f64::NAN, |s| s.eps_spent_gdp);
    t.push(vec!["final".into(), opt_float(loss), opt_float(acc), String::new(), String::new(), format_float(m.sigma), format_float(eps)]);
    t
}

/// Loads a config, runs it and writes `manifest.json` and `metrics.csv` to the output directory.
pub fn cmd_train(config_path: &Path, out_dir: Option<&Path>, seed: Option<u64>) -> Result<RunManifest> {
    let mut config = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(d) = out_dir {
        config.out_dir = Some(d.to_path_buf());
    }
    let manifest = run_training(&config)?;
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    metrics_table(&manifest).write(&dir.join("metrics.csv"))?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
