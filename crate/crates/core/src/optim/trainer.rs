use crate::dp::{privatize, ClipPolicy};
use crate::error::{Error, Result};
use crate::models::{batch_loss_accuracy, per_sample_gradients, Dataset, ModelSpec, ParamVector};
use crate::numeric::{norm, poisson_subsample, Matrix, RngStream};

use super::{Optimizer, OptimizerConfig};

/// Summary of one private step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based step index.
    pub step: usize,
    pub batch_size: usize,
    /// Mean loss on the sampled batch before the update; `None` for an empty batch.
    pub loss: Option<f64>,
    pub accuracy: Option<f64>,
    pub grad_norm_mean: f64,
    pub clip_fraction: f64,
    pub noise_std: f64,
}

/// Poisson-sampled private training loop.
///
/// Step `t` samples its batch from stream `sample/step/t` and its noise from
/// `noise/step/t`, so two trainers with the same seed and data see the same
/// batches and the same unit noise whatever their policy or optimizer.
/// The privatized sum is divided by the expected batch size `p * n`.
#[derive(Debug, Clone)]
pub struct DpTrainer<'a> {
    spec: &'a ModelSpec,
    data: &'a Dataset,
    policy: ClipPolicy,
    sigma: f64,
    sample_rate: f64,
    seed: u64,
    optimizer: Optimizer,
    w: ParamVector,
    t: usize,
}

impl<'a> DpTrainer<'a> {
    pub fn new(
        spec: &'a ModelSpec,
        data: &'a Dataset,
        policy: ClipPolicy,
        optimizer: OptimizerConfig,
        sigma: f64,
        sample_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        data.validate_for(spec)?;
        policy.validate()?;
        if !(sample_rate > 0.0 && sample_rate <= 1.0) {
            return Err(Error::invalid(format!("sample rate must lie in (0, 1], got {sample_rate}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("noise multiplier must be >= 0, got {sigma}")));
        }
        let w = spec.init_params(&RngStream::new(seed, "init"));
        let optimizer = Optimizer::new(optimizer, w.len())?;
        Ok(DpTrainer { spec, data, policy, sigma, sample_rate, seed, optimizer, w, t: 0 })
    }

    /// Replaces the initial parameters.
    pub fn with_params(mut self, w: ParamVector) -> Result<Self> {
        if w.len() != self.w.len() {
            return Err(Error::invalid(format!("expected {} parameters, got {}", self.w.len(), w.len())));
        }
        self.w = w;
        Ok(self)
    }

    pub fn params(&self) -> &ParamVector {
        &self.w
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let t = self.t + 1;
        let n = self.data.len();
        let idx = poisson_subsample(&RngStream::new(self.seed, format!("sample/step/{t}")), n, self.sample_rate)?;
        let d = self.w.len();
        let (grads, loss, accuracy) = if idx.is_empty() {
            (Matrix::zeros(0, d), None, None)
        } else {
            let batch = self.data.subset(&idx)?;
            let grads = per_sample_gradients(self.spec, &self.w, &batch)?;
            let (loss, acc) = if self.spec.is_classification() {
                let (l, a) = batch_loss_accuracy(self.spec, &self.w, &batch)?;
                (l, Some(a))
            } else {
                (crate::models::mean_loss(self.spec, &self.w, &batch)?, None)
            };
            (grads, Some(loss), acc)
        };
        if let Some(l) = loss {
            if !l.is_finite() {
                return Err(Error::NumericAbort { step: t, message: format!("batch loss is {l}") });
            }
        }
        let grad_norm_mean = if grads.rows() == 0 { 0.0 } else { grads.iter_rows().map(norm).sum::<f64>() / grads.rows() as f64 };
        let private = privatize(&self.policy, &grads, self.sigma, &RngStream::new(self.seed, format!("noise/step/{t}")))?;
        let mut g = private.grad;
        g.scale(1.0 / (self.sample_rate * n as f64));
        self.optimizer.step(&mut self.w, &g)?;
        if !self.w.is_finite() {
            return Err(Error::NumericAbort { step: t, message: "parameters became non-finite".into() });
        }
        self.t = t;
        Ok(StepReport {
            step: t,
            batch_size: idx.len(),
            loss,
            accuracy,
            grad_norm_mean,
            clip_fraction: private.clip_fraction,
            noise_std: private.noise_std_used,
        })
    }

    /// Runs `steps` steps and returns their reports.
    pub fn run(&mut self, steps: usize) -> Result<Vec<StepReport>> {
        (0..steps).map(|_| self.step()).collect()
    }
}
