//! Convergence-bound numerics for automatic clipping.
//!
//! The central quantity is
//! `f(c, S; G) = (1 + Sc) / (sqrt(S^2 + 2Sc + 1) + G) + (1 - Sc) / (sqrt(S^2 - 2Sc + 1) + G)`,
//! the expected descent per unit gradient norm when the noise-to-signal ratio
//! is `S`, the cosine between gradient and noise is `c` and `G = gamma / |g|`.
//! Its minimum over `c` gives the distance measure `M`, whose inverse bounds
//! the gradient norm reached after `T` steps.

mod audit;
mod envelope;

use serde::{Deserialize, Serialize};

use crate::accountant::gdp_mu;
use crate::error::{Error, Result};

pub use audit::{lemma_a, lemma_a_prime, lemma_audit, AuditGrid, AuditReport};
pub use envelope::{envelope, EnvelopeMode, PiecewiseLinear};

/// `f(c, S; Gamma)` for `c` in `[0, 1]`, `S > 0`, `Gamma >= 0`.
///
/// A vanishing numerator makes its term zero, which fixes the `0/0` at
/// `c = S = 1`, `Gamma = 0`.
pub fn f_value(c: f64, s: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::invalid(format!("c must lie in (0, 1], got {c}")));
    }
    if !(s > 0.0 && s.is_finite()) || !(gamma >= 0.0) {
        return Err(Error::invalid(format!("need S > 0 and Gamma >= 0, got S = {s}, Gamma = {gamma}")));
    }
    // S^2 +- 2Sc + 1 = (S +- c)^2 + (1 - c^2), which stays non-negative in floating point
    let rest = 1.0 - c * c;
    let term = |num: f64, rad: f64| if num == 0.0 { 0.0 } else { num / (rad.sqrt() + gamma) };
    Ok(term(1.0 + s * c, (s + c).powi(2) + rest) + term(1.0 - s * c, (s - c).powi(2) + rest))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `min_{c in (0, 1]} f(c, r; Gamma)` by a 1000-point scan refined with golden-section search.
pub fn min_f_numeric(r: f64, gamma: f64) -> Result<f64> {
    const SCAN: usize = 1000;
    let f = |c: f64| f_value(c, r, gamma);
    let mut best = (1.0, f(1.0)?);
    for k in 1..SCAN {
        let c = k as f64 / SCAN as f64;
        let v = f(c)?;
        if v < best.1 {
            best = (c, v);
        }
    }
    let (mut a, mut b) = ((best.0 - 1.0 / SCAN as f64).max(1e-12), (best.0 + 1.0 / SCAN as f64).min(1.0));
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-10 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(best.1.min(f1).min(f2).min(f(0.5 * (a + b))?))
}

/// `min_{c in (0, 1]} f(c, r; Gamma)`: closed form `Gamma/(r+Gamma-1) - Gamma/(r+Gamma+1)` for `r >= 1`.
pub fn min_f(r: f64, gamma: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) || !(gamma >= 0.0) {
        return Err(Error::invalid(format!("need r > 0 and Gamma >= 0, got r = {r}, Gamma = {gamma}")));
    }
    if r >= 1.0 {
        if gamma == 0.0 {
            return Ok(0.0);
        }
        if gamma.is_infinite() {
            return Ok(0.0);
        }
        return Ok(gamma / (r + gamma - 1.0) - gamma / (r + gamma + 1.0));
    }
    min_f_numeric(r, gamma)
}

/// `M(x; r, xi, gamma) = min_c f(c, r; gamma / (x + xi/r)) * x`.
pub fn distance_m(x: f64, r: f64, xi: f64, gamma: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) || !(xi >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::invalid(format!("need x >= 0, xi >= 0, gamma >= 0; got {x}, {xi}, {gamma}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(min_f(r, gamma / (x + xi / r))? * x)
}

/// Supremum of `M` over `x >= 0` for `r > 1`: `gamma/(r-1) - gamma/(r+1)`.
pub fn inverse_m_supremum(r: f64, gamma: f64) -> f64 {
    2.0 * gamma / (r * r - 1.0)
}

/// Closed-form inverse of `M` for `r > 1`, `gamma > 0`, on `[0, gamma/(r-1) - gamma/(r+1))`.
pub fn inverse_m(y: f64, r: f64, xi: f64, gamma: f64) -> Result<f64> {
    if !(r > 1.0 && r.is_finite()) || !(gamma > 0.0) || !(xi >= 0.0) {
        return Err(Error::invalid(format!("inverse_m needs r > 1, gamma > 0, xi >= 0; got {r}, {gamma}, {xi}")));
    }
    if !(y >= 0.0) {
        return Err(Error::invalid(format!("inverse_m needs y >= 0, got {y}")));
    }
    let sup = inverse_m_supremum(r, gamma);
    let denom = 2.0 * gamma - (r * r - 1.0) * y;
    if y >= sup || !(denom > 0.0) {
        return Err(Error::Domain { value: y, supremum: sup });
    }
    let a = xi / r;
    let b = 2.0 * xi * y + 2.0 * gamma * y + y * y;
    // gamma * (sqrt(a^2 + b) - a) without cancellation
    let root = if b == 0.0 { 0.0 } else { gamma * b / ((a * a + b).sqrt() + a) };
    Ok(((r * r - 1.0) * a * y + r * gamma * y + root) / denom)
}

/// Which automatic clipping the bound describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    AutoV,
    AutoS,
}

/// Grid used for the minimum over `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl RGrid {
    pub fn for_mode(mode: BoundMode) -> Self {
        match mode {
            BoundMode::AutoS => RGrid { lo: 1.001, hi: 1e6, points: 512 },
            BoundMode::AutoV => RGrid { lo: 0.01, hi: 0.999, points: 512 },
        }
    }

    fn values(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        (0..self.points).map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp()).collect()
    }
}

/// Fraction of the `M` image where inverse evaluations stop.
pub const SUPREMUM_CAP: f64 = 0.999;

/// Value of the bound `G` with the minimizing ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub r: f64,
    /// Some grid ratios were skipped because `x` exceeded the capped image of `M`.
    pub capped: bool,
}

/// `xi/r + F(x; r, xi, gamma)` for one ratio, or `None` where `F` is infinite.
pub fn bound_at_r(x: f64, r: f64, xi: f64, gamma: f64, mode: BoundMode) -> Result<Option<f64>> {
    match mode {
        BoundMode::AutoV => {
            if r >= 1.0 {
                return Ok(None);
            }
            Ok(Some(xi / r + x / min_f(r, 0.0)?))
        }
        BoundMode::AutoS => {
            if x >= SUPREMUM_CAP * inverse_m_supremum(r, gamma) {
                return Ok(None);
            }
            Ok(Some(xi / r + inverse_m(x, r, xi, gamma)?))
        }
    }
}

/// `G(x; xi, gamma)`: minimum over the ratio grid of `xi/r + F(x; r, xi, gamma)`,
/// refined once on a second grid between the neighbours of the best ratio.
pub fn bound_auto(x: f64, xi: f64, gamma: f64, mode: BoundMode) -> Result<BoundValue> {
    bound_auto_on(x, xi, gamma, mode, RGrid::for_mode(mode))
}

pub fn bound_auto_on(x: f64, xi: f64, gamma: f64, mode: BoundMode, grid: RGrid) -> Result<BoundValue> {
    if !(x >= 0.0 && x.is_finite()) || !(xi >= 0.0) {
        return Err(Error::invalid(format!("bound needs x >= 0 and xi >= 0, got {x}, {xi}")));
    }
    if mode == BoundMode::AutoS && !(gamma > 0.0) {
        return Err(Error::invalid("the AUTO-S bound needs gamma > 0"));
    }
    if mode == BoundMode::AutoV && grid.hi >= 1.0 {
        return Err(Error::invalid("the AUTO-V bound is infinite for r >= 1; restrict the grid below 1"));
    }
    if grid.points < 3 || !(grid.lo > 0.0 && grid.hi > grid.lo) {
        return Err(Error::invalid("ratio grid needs >= 3 points on a positive range"));
    }
    let mut capped = false;
    let mut scan = |rs: &[f64]| -> Result<Option<(usize, f64)>> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &r) in rs.iter().enumerate() {
            match bound_at_r(x, r, xi, gamma, mode)? {
                Some(v) if best.is_none_or(|b| v < b.1) => best = Some((i, v)),
                Some(_) => {}
                None => capped = true,
            }
        }
        Ok(best)
    };
    let coarse = grid.values(grid.lo, grid.hi);
    let Some((i, v)) = scan(&coarse)? else {
        return Err(Error::Domain { value: x, supremum: SUPREMUM_CAP * inverse_m_supremum(grid.lo, gamma) });
    };
    let (lo, hi) = (coarse[i.saturating_sub(1)], coarse[(i + 1).min(coarse.len() - 1)]);
    let fine = grid.values(lo, hi);
    let mut out = BoundValue { value: v, r: coarse[i], capped: false };
    if let Some((j, w)) = scan(&fine)? {
        if w < out.value {
            out = BoundValue { value: w, r: fine[j], capped: false };
        }
    }
    out.capped = capped;
    Ok(out)
}

/// `(x, bound)` pairs over a `T` grid, with metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub method: String,
    pub xi: f64,
    pub gamma: f64,
    pub points: Vec<(f64, f64)>,
    pub capped: bool,
}

impl BoundCurve {
    /// Least-squares slope of `ln bound` against `ln T` over `[t_min, t_max]`.
    pub fn loglog_slope(&self, t_min: f64, t_max: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.points.iter().filter(|(t, b)| *t >= t_min && *t <= t_max && *b > 0.0).map(|(t, b)| (t.ln(), b.ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Bound curve with the first argument set to `coef / sqrt(T)`.
pub fn auto_curve(mode: BoundMode, xi: f64, gamma: f64, coef: f64, ts: &[f64]) -> Result<BoundCurve> {
    let mut capped = false;
    let points = ts
        .iter()
        .map(|&t| {
            let b = bound_auto(coef / t.sqrt(), xi, gamma, mode)?;
            capped |= b.capped;
            Ok((t, b.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let method = match mode {
        BoundMode::AutoV => "auto_v",
        BoundMode::AutoS => "auto_s",
    };
    Ok(BoundCurve { method: method.into(), xi, gamma, points, capped })
}

/// Non-private SGD curve `sqrt(coef / sqrt(T))`.
pub fn sgd_curve(coef: f64, ts: &[f64]) -> BoundCurve {
    let points = ts.iter().map(|&t| (t, sgd_baseline(t, 0.5 * coef, 1.0, 0.0, 1.0))).collect();
    BoundCurve { method: "sgd_baseline".into(), xi: 0.0, gamma: 0.0, points, capped: false }
}

/// `T^{-1/4} sqrt(2 dL L + xi^2 / B)`
pub fn sgd_baseline(t: f64, delta_l: f64, l: f64, xi: f64, b: f64) -> f64 {
    t.powf(-0.25) * (2.0 * delta_l * l + xi * xi / b).sqrt()
}

/// Problem constants feeding the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub xi: f64,
    pub gamma: f64,
    /// Smoothness constant `L`.
    pub l: f64,
    /// `L_0 - L_*`.
    pub delta_l: f64,
    pub d: f64,
    pub batch: f64,
    pub sigma: f64,
    pub steps: f64,
    pub mu: f64,
    pub n: f64,
}

impl Default for TheoryParams {
    fn default() -> Self {
        TheoryParams { xi: 1.0, gamma: 0.01, l: 1.0, delta_l: 1.0, d: 1.0, batch: 1.0, sigma: 0.0, steps: 1.0, mu: 1.0, n: 1.0 }
    }
}

/// How the noise enters: a fixed `sigma`, or the `sigma` implied by a GDP budget `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Direct,
    Gdp,
}

/// `sigma^2` such that `(B/n) sqrt(T (e^{1/sigma^2} - 1)) = mu`.
pub fn sigma_sq_for_mu(p: &TheoryParams) -> Result<f64> {
    if !(p.mu > 0.0) {
        return Err(Error::invalid("GDP mode needs mu > 0"));
    }
    if !(p.n > 0.0 && p.batch > 0.0 && p.steps > 0.0) {
        return Err(Error::invalid("GDP mode needs n, B, T > 0"));
    }
    let s2 = 1.0 / (p.mu * p.mu * p.n * p.n / (p.batch * p.batch * p.steps)).ln_1p();
    debug_assert!(gdp_mu(s2.sqrt(), p.batch / p.n, 1).is_ok());
    Ok(s2)
}

/// `1 + sigma^2 d / B^2`
pub fn noise_factor(p: &TheoryParams, mode: NoiseMode) -> Result<f64> {
    let s2 = match mode {
        NoiseMode::Direct => p.sigma * p.sigma,
        NoiseMode::Gdp => sigma_sq_for_mu(p)?,
    };
    if !(p.batch > 0.0) {
        return Err(Error::invalid("batch size must be > 0"));
    }
    Ok(1.0 + s2 * p.d / (p.batch * p.batch))
}

/// First argument of the bound: `(4/sqrt(T)) sqrt(dL L (1 + sigma^2 d / B^2))`.
pub fn dp_bound_inputs(p: &TheoryParams, mode: NoiseMode) -> Result<f64> {
    if !(p.steps > 0.0) || !(p.delta_l >= 0.0) || !(p.l > 0.0) {
        return Err(Error::invalid("need T > 0, dL >= 0, L > 0"));
    }
    Ok(4.0 / p.steps.sqrt() * (p.delta_l * p.l * noise_factor(p, mode)?).sqrt())
}

/// `2 dL / eta + 2 L eta (1 + sigma^2 d / B^2)`
pub fn hyperbola(eta: f64, p: &TheoryParams, mode: NoiseMode) -> Result<f64> {
    Ok(2.0 * p.delta_l / eta + 2.0 * p.l * eta * noise_factor(p, mode)?)
}

/// Minimizer of [`hyperbola`]: `sqrt(dL / (L (1 + sigma^2 d / B^2)))`.
pub fn optimal_lr(p: &TheoryParams, mode: NoiseMode) -> Result<f64> {
    Ok((p.delta_l / (p.l * noise_factor(p, mode)?)).sqrt())
}
