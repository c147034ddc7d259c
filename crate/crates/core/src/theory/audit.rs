//! Grid checks of the sign conditions behind the monotonicity of `f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::f_value;

/// Grid over `c in (0, 1)`, `S in (0, s_max]`, `Gamma in [0, gamma_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub n_c: usize,
    pub n_s: usize,
    pub n_gamma: usize,
    pub s_max: f64,
    pub gamma_max: f64,
}

impl Default for AuditGrid {
    fn default() -> Self {
        AuditGrid { n_c: 100, n_s: 100, n_gamma: 10, s_max: 10.0, gamma_max: 5.0 }
    }
}

impl AuditGrid {
    fn cs(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n_c).map(|i| i as f64 / (self.n_c + 1) as f64)
    }

    fn ss(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n_s).map(|j| self.s_max * j as f64 / self.n_s as f64)
    }

    fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.n_gamma.max(2) - 1;
        (0..self.n_gamma).map(move |i| self.gamma_max * i as f64 / k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub grid: AuditGrid,
    pub checks: usize,
    pub violations: Vec<String>,
}

/// `A(c, S)`
pub fn lemma_a(c: f64, s: f64) -> f64 {
    let (p, m) = ((s * s + 2.0 * c * s + 1.0).sqrt(), (s * s - 2.0 * c * s + 1.0).sqrt());
    p * (3.0 * c * c * s - 2.0 * c * (s * s + 1.0) + s) + m * (3.0 * c * c * s + 2.0 * c * (s * s + 1.0) + s)
}

/// `A'(c, S)`
pub fn lemma_a_prime(c: f64, s: f64) -> f64 {
    let (p, m) = ((s * s + 2.0 * c * s + 1.0).sqrt(), (s * s - 2.0 * c * s + 1.0).sqrt());
    (s * s + 3.0 * c * s + 2.0) * m - (s * s - 3.0 * c * s + 2.0) * p
}

fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Checks `A > 0`, `A' > 0` (S > 1), `df/dS < 0` and `df/dc < 0` (S > 1) on the grid.
///
/// Derivatives are central differences. Returns [`Error::AuditFailure`]
/// listing every offending point.
pub fn lemma_audit(grid: &AuditGrid) -> Result<AuditReport> {
    if grid.n_c < 1 || grid.n_s < 1 || grid.n_gamma < 1 || !(grid.s_max > 0.0) || !(grid.gamma_max >= 0.0) {
        return Err(Error::invalid("audit grid needs positive sizes and ranges"));
    }
    let mut violations = Vec::new();
    let mut checks = 0;
    for c in grid.cs() {
        for s in grid.ss() {
            checks += 1;
            let a = lemma_a(c, s);
            if !(a > 0.0) {
                violations.push(format!("A({c}, {s}) = {a}"));
            }
            if s > 1.0 {
                checks += 1;
                let ap = lemma_a_prime(c, s);
                if !(ap > 0.0) {
                    violations.push(format!("A'({c}, {s}) = {ap}"));
                }
            }
            for g in grid.gammas() {
                checks += 1;
                let h = 1e-6 * s;
                let ds = central_diff(|x| f_value_unchecked(c, x, g), s, h);
                if !(ds < 0.0) {
                    violations.push(format!("df/dS({c}, {s}, {g}) = {ds}"));
                }
                if s > 1.0 {
                    checks += 1;
                    let h = 1e-6 * c.min(1.0 - c);
                    let dc = central_diff(|x| f_value_unchecked(x, s, g), c, h);
                    if !(dc < 0.0) {
                        violations.push(format!("df/dc({c}, {s}, {g}) = {dc}"));
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(AuditReport { grid: *grid, checks, violations })
    } else {
        Err(Error::AuditFailure(violations))
    }
}

fn f_value_unchecked(c: f64, s: f64, g: f64) -> f64 {
    f_value(c, s, g).unwrap_or(f64::NAN)
}
