//! Privacy accounting for Poisson-subsampled Gaussian steps.
//!
//! Two accountants are provided. The Rényi accountant bounds the order-`alpha`
//! divergence of one step, composes additively over `T` steps and converts
//! with `eps = min_alpha [T * eps_alpha + ln(1/delta) / (alpha - 1)]` over a
//! fixed order grid. The Gaussian-DP accountant uses the central-limit
//! approximation `mu = p * sqrt(T * (exp(1/sigma^2) - 1))`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Search range for calibrated noise multipliers.
pub const SIGMA_RANGE: (f64, f64) = (0.3, 100.0);

/// Relative bracket width at which calibration stops.
pub const SIGMA_TOLERANCE: f64 = 1e-4;

/// Target budget plus the mechanism's sampling rate and length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacySpec {
    pub eps: f64,
    pub delta: f64,
    pub sample_rate: f64,
    pub steps: u64,
}

impl PrivacySpec {
    pub fn new(eps: f64, delta: f64, sample_rate: f64, steps: u64) -> Result<Self> {
        let s = PrivacySpec { eps, delta, sample_rate, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.eps)));
        }
        check_delta(self.delta)?;
        check_rate(self.sample_rate)?;
        if self.steps == 0 {
            return Err(Error::invalid("step count must be >= 1"));
        }
        Ok(())
    }

    /// Advisory message when `delta` is not below `1/n`.
    pub fn delta_warning(&self, n: usize) -> Option<String> {
        (self.delta >= 1.0 / n as f64).then(|| format!("delta {} is not below 1/n = {}", self.delta, 1.0 / n as f64))
    }
}

/// Gaussian-DP parameter of a run over `n` records with expected batch `batch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdpParams {
    pub mu: f64,
    pub n: u64,
    pub batch: f64,
}

impl GdpParams {
    pub fn from_mechanism(sigma: f64, n: u64, batch: f64, steps: u64) -> Result<Self> {
        if n == 0 || !(batch > 0.0 && batch <= n as f64) {
            return Err(Error::invalid(format!("need 0 < batch <= n, got batch {batch}, n {n}")));
        }
        Ok(GdpParams { mu: gdp_mu(sigma, batch / n as f64, steps)?, n, batch })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountantMethod {
    #[default]
    Rdp,
    Gdp,
}

impl std::str::FromStr for AccountantMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rdp" => Ok(AccountantMethod::Rdp),
            "gdp" => Ok(AccountantMethod::Gdp),
            _ => Err(Error::invalid(format!("unknown accountant {s:?}; expected rdp or gdp"))),
        }
    }
}

impl std::fmt::Display for AccountantMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AccountantMethod::Rdp => "rdp",
            AccountantMethod::Gdp => "gdp",
        })
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("noise multiplier must be > 0, got {sigma}")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn check_rate(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate must lie in (0, 1], got {p}")))
    }
}

/// `p * sqrt(T * (exp(1/sigma^2) - 1))`
pub fn gdp_mu(sigma: f64, p: f64, steps: u64) -> Result<f64> {
    check_sigma(sigma)?;
    check_rate(p)?;
    Ok(p * (steps as f64 * (1.0 / (sigma * sigma)).exp_m1()).sqrt())
}

/// `mu^2 + mu * sqrt(2 ln(1/delta))`
pub fn gdp_epsilon(mu: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::invalid(format!("mu must be finite and >= 0, got {mu}")));
    }
    Ok(mu * mu + mu * (2.0 * (1.0 / delta).ln()).sqrt())
}

/// Orders `1.5, 1.75, ..., 64` followed by `128, 256, 512`.
pub fn rdp_orders() -> &'static [f64] {
    static ORDERS: OnceLock<Vec<f64>> = OnceLock::new();
    ORDERS.get_or_init(|| (6..=256).map(|k| k as f64 * 0.25).chain([128.0, 256.0, 512.0]).collect())
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

fn log_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        a
    } else if a <= b {
        f64::NEG_INFINITY
    } else {
        a + (-(b - a).exp()).ln_1p()
    }
}

/// `ln(erfc(x))`, with an asymptotic series once `erfc` underflows.
fn log_erfc(x: f64) -> f64 {
    if x < 20.0 {
        erfc(x).ln()
    } else {
        let x2 = x * x;
        -x2 - x.ln() - 0.5 * std::f64::consts::PI.ln() + (1.0 - 0.5 / x2 + 0.75 / (x2 * x2) - 1.875 / (x2 * x2 * x2)).ln()
    }
}

fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// `ln A_alpha` for integer `alpha`: the binomial expansion of the mixture moment.
fn log_a_int(p: f64, sigma: f64, alpha: u64) -> f64 {
    let a = alpha as f64;
    (0..=alpha).fold(f64::NEG_INFINITY, |acc, k| {
        let k = k as f64;
        let term = ln_binom(a, k) + k * p.ln() + (a - k) * (-p).ln_1p() + (k * k - k) / (2.0 * sigma * sigma);
        log_add(acc, term)
    })
}

/// `ln A_alpha` for fractional `alpha`, summing the two-sided series until terms fall below `e^-30`.
fn log_a_frac(p: f64, sigma: f64, alpha: f64) -> f64 {
    let (mut log_a0, mut log_a1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let z0 = sigma * sigma * (1.0 / p - 1.0).ln() + 0.5;
    let s2 = std::f64::consts::SQRT_2 * sigma;
    // running binomial coefficient C(alpha, i) as (sign, ln|.|)
    let (mut sign, mut log_coef) = (1.0f64, 0.0f64);
    for i in 0..100_000u32 {
        let fi = f64::from(i);
        if i > 0 {
            let factor = (alpha - fi + 1.0) / fi;
            if factor == 0.0 {
                break;
            }
            sign *= factor.signum();
            log_coef += factor.abs().ln();
        }
        let j = alpha - fi;
        let log_t0 = log_coef + fi * p.ln() + j * (-p).ln_1p();
        let log_t1 = log_coef + j * p.ln() + fi * (-p).ln_1p();
        let log_e0 = 0.5f64.ln() + log_erfc((fi - z0) / s2);
        let log_e1 = 0.5f64.ln() + log_erfc((z0 - j) / s2);
        let log_s0 = log_t0 + (fi * fi - fi) / (2.0 * sigma * sigma) + log_e0;
        let log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
        if sign > 0.0 {
            log_a0 = log_add(log_a0, log_s0);
            log_a1 = log_add(log_a1, log_s1);
        } else {
            log_a0 = log_sub(log_a0, log_s0);
            log_a1 = log_sub(log_a1, log_s1);
        }
        if log_s0.max(log_s1) < -30.0 {
            break;
        }
    }
    log_add(log_a0, log_a1)
}

/// Rényi divergence bound of one subsampled Gaussian step at order `alpha > 1`.
pub fn rdp_step(sigma: f64, p: f64, alpha: f64) -> Result<f64> {
    check_sigma(sigma)?;
    check_rate(p)?;
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("RDP order must be > 1, got {alpha}")));
    }
    if p == 1.0 {
        return Ok(alpha / (2.0 * sigma * sigma));
    }
    let log_a = if alpha.fract() == 0.0 { log_a_int(p, sigma, alpha as u64) } else { log_a_frac(p, sigma, alpha) };
    Ok(log_a / (alpha - 1.0))
}

/// `(eps, best order)` after `steps` compositions.
pub fn rdp_epsilon_with_order(sigma: f64, p: f64, steps: u64, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let log_inv_delta = (1.0 / delta).ln();
    let mut best = (f64::INFINITY, f64::NAN);
    for &alpha in rdp_orders() {
        let eps = steps as f64 * rdp_step(sigma, p, alpha)? + log_inv_delta / (alpha - 1.0);
        if eps < best.0 {
            best = (eps, alpha);
        }
    }
    Ok(best)
}

pub fn rdp_epsilon(sigma: f64, p: f64, steps: u64, delta: f64) -> Result<f64> {
    rdp_epsilon_with_order(sigma, p, steps, delta).map(|(e, _)| e)
}

/// Epsilon spent by `steps` steps at noise `sigma` under `method`.
pub fn epsilon(method: AccountantMethod, sigma: f64, p: f64, steps: u64, delta: f64) -> Result<f64> {
    match method {
        AccountantMethod::Rdp => rdp_epsilon(sigma, p, steps, delta),
        AccountantMethod::Gdp => gdp_epsilon(gdp_mu(sigma, p, steps)?, delta),
    }
}

/// Smallest noise multiplier in [`SIGMA_RANGE`] meeting `spec.eps`, by bisection.
///
/// Returns the upper end of the final bracket, so the spent epsilon never
/// exceeds the target.
pub fn calibrate_sigma(spec: &PrivacySpec, method: AccountantMethod) -> Result<f64> {
    spec.validate()?;
    let eps_at = |s: f64| epsilon(method, s, spec.sample_rate, spec.steps, spec.delta);
    let (mut lo, mut hi) = SIGMA_RANGE;
    if eps_at(hi)? > spec.eps {
        return Err(Error::CalibrationFailure { target: spec.eps, lo, hi });
    }
    if eps_at(lo)? <= spec.eps {
        return Ok(lo);
    }
    while hi - lo > SIGMA_TOLERANCE * lo {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= spec.eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
