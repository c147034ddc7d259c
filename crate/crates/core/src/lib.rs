//! Differentially private optimization with automatic per-sample clipping.
//!
//! The crate is organised bottom-up:
//!
//! - [`numeric`]: vectors, matrices, keyed random streams, sampling.
//! - [`models`]: small models with exact per-sample gradients and synthetic data.
//! - [`dp`]: the clipping zoo and the Gaussian privatization step.
//! - [`accountant`]: Rényi and Gaussian-DP accounting and noise calibration.
//! - [`optim`]: update rules, the private training loop and paired-run checks.
//! - [`theory`]: convergence-bound functions, envelopes and lemma audits.
//! - [`experiments`]: dataset loading, experiment runners and CSV/JSON output.

pub mod accountant;
pub mod dp;
pub mod error;
pub mod experiments;
pub mod models;
pub mod numeric;
pub mod optim;
pub mod theory;

pub use accountant::{calibrate_sigma, gdp_epsilon, gdp_mu, rdp_epsilon, AccountantMethod, GdpParams, PrivacySpec};
pub use dp::{clip_and_sum, clip_factor, noise_to_signal, privatize, ClipPolicy, ClipRule, LayerMode, PrivatizedGrad, Thresholds};
pub use error::{Error, Result};
pub use models::{Dataset, ModelKind, ModelSpec, ParamVector};
pub use numeric::{LayerPartition, Matrix, RngStream, Vector};
pub use optim::{DpTrainer, Optimizer, OptimizerConfig, OptimizerKind, OptimizerState};
