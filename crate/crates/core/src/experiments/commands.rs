//! Calibration, equivalence and bound-curve commands.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::{calibrate_sigma, epsilon, AccountantMethod, PrivacySpec};
use crate::error::{Error, Result};
use crate::numeric::RngStream;
use crate::optim::{abadi_control_run, equivalence_pair_run, EquivalenceFixture, OptimizerKind, PairTolerance};
use crate::theory::{auto_curve, log_space, sgd_curve, BoundCurve, BoundMode};

use super::output::{format_float, write_json, CsvTable};

/// `x` rounded to six significant digits.
pub fn six_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (5 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub eps_target: f64,
    pub delta: f64,
    pub sample_rate: f64,
    pub steps: u64,
    pub method: AccountantMethod,
    pub sigma: f64,
    pub eps_roundtrip: f64,
}

pub fn cmd_calibrate(eps: f64, delta: f64, sample_rate: f64, steps: u64, method: AccountantMethod) -> Result<CalibrationRecord> {
    let spec = PrivacySpec::new(eps, delta, sample_rate, steps)?;
    let sigma = calibrate_sigma(&spec, method)?;
    Ok(CalibrationRecord {
        eps_target: eps,
        delta,
        sample_rate,
        steps,
        method,
        sigma,
        eps_roundtrip: epsilon(method, sigma, sample_rate, steps, delta)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceTrial {
    pub trial: usize,
    pub r: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub kind: OptimizerKind,
    pub steps: usize,
    /// Negative control: Abadi clipping at `r` and `r / 2`, `r` in [1, 4], under the same rescaling.
    pub control: bool,
    pub tolerance: f64,
    pub trials: Vec<EquivalenceTrial>,
    /// For the control, a pass means every trial exceeded the tolerance.
    pub pass: bool,
}

impl EquivalenceReport {
    /// Trial with the largest deviation (smallest, for a control).
    pub fn worst(&self) -> Option<&EquivalenceTrial> {
        let key = |t: &&EquivalenceTrial| if self.control { -t.deviation } else { t.deviation };
        self.trials.iter().max_by(|a, b| key(a).total_cmp(&key(b)))
    }

    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(["trial", "r", "lr", "weight_decay", "deviation", "pass"]);
        for tr in &self.trials {
            let mut row = vec![tr.trial.to_string()];
            row.extend([tr.r, tr.lr, tr.weight_decay, tr.deviation].map(format_float));
            row.push(tr.pass.to_string());
            t.push(row);
        }
        t
    }
}

/// Random `(R, lr, lambda)` trials of the threshold/learning-rate pairing.
pub fn cmd_equivalence(kind: OptimizerKind, steps: usize, trials: usize, seed: u64, control: bool) -> Result<EquivalenceReport> {
    if steps == 0 || trials == 0 {
        return Err(Error::invalid("steps and trials must be >= 1"));
    }
    let fixture = EquivalenceFixture::logistic(seed)?;
    let tolerance = PairTolerance::for_kind(kind);
    let root = RngStream::new(seed, "equivalence");
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut g = root.child(format!("trial/{trial}")).generator();
        let r = 10f64.powf(g.random_range(-2.0..1.0));
        let lr = if kind.is_adaptive() { 10f64.powf(g.random_range(-3.0..-1.0)) } else { 10f64.powf(g.random_range(-2.0..0.0)) };
        let weight_decay = 10f64.powf(g.random_range(-4.0..-1.0));
        let (deviation, pass) = if control {
            let r = g.random_range(1.0..4.0);
            let d = abadi_control_run(kind, steps, seed, r, r / 2.0, lr, weight_decay, &fixture)?;
            (d, d > tolerance)
        } else {
            let d = equivalence_pair_run(kind, steps, seed, r, lr, weight_decay, 0.01, &fixture)?;
            (d, d <= tolerance)
        };
        rows.push(EquivalenceTrial { trial, r, lr, weight_decay, deviation, pass });
    }
    let pass = rows.iter().all(|t| t.pass);
    Ok(EquivalenceReport { kind, steps, control, tolerance, trials: rows, pass })
}

/// Turns a failed report into the error the CLI maps to its exit status.
pub fn require_pass(report: &EquivalenceReport) -> Result<()> {
    if report.pass {
        return Ok(());
    }
    let worst = report.worst().map(serde_json::to_string).transpose()?.unwrap_or_default();
    Err(Error::EquivalenceFailure { kind: report.kind.to_string(), worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSettings {
    pub xi: f64,
    pub gamma: f64,
    /// Scale of the `1/sqrt(T)` term for the private bounds.
    pub coef: f64,
    pub sgd_coef: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub fit_min: f64,
    pub fit_max: f64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings { xi: 25.0, gamma: 0.01, coef: 10.0, sgd_coef: 2.0, t_min: 1e6, t_max: 1e12, points: 61, fit_min: 1e8, fit_max: 1e12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub settings: CurveSettings,
    pub auto_v_slope: Option<f64>,
    pub auto_s_slope: Option<f64>,
    pub sgd_baseline_slope: Option<f64>,
    pub auto_v_min: f64,
    pub auto_v_capped: bool,
    pub auto_s_capped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub auto_v: BoundCurve,
    pub auto_s: BoundCurve,
    pub sgd: BoundCurve,
    pub summary: CurveSummary,
}

pub fn theory_curves(s: &CurveSettings) -> Result<Curves> {
    if !(s.gamma > 0.0) {
        return Err(Error::invalid("auto_s curves need gamma > 0"));
    }
    if !(s.t_min > 0.0 && s.t_max > s.t_min && s.points >= 2) {
        return Err(Error::invalid(format!("bad T range [{}, {}] with {} points", s.t_min, s.t_max, s.points)));
    }
    let ts = log_space(s.t_min, s.t_max, s.points);
    let auto_v = auto_curve(BoundMode::AutoV, s.xi, s.gamma, s.coef, &ts)?;
    let auto_s = auto_curve(BoundMode::AutoS, s.xi, s.gamma, s.coef, &ts)?;
    let sgd = sgd_curve(s.sgd_coef, &ts);
    let summary = CurveSummary {
        settings: *s,
        auto_v_slope: auto_v.loglog_slope(s.fit_min, s.fit_max),
        auto_s_slope: auto_s.loglog_slope(s.fit_min, s.fit_max),
        sgd_baseline_slope: sgd.loglog_slope(s.fit_min, s.fit_max),
        auto_v_min: auto_v.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        auto_v_capped: auto_v.capped,
        auto_s_capped: auto_s.capped,
    };
    Ok(Curves { auto_v, auto_s, sgd, summary })
}

pub fn curve_table(c: &BoundCurve) -> CsvTable {
    let mut t = CsvTable::new(["t", "bound"]).with_comment(format!("method={} xi={} gamma={}", c.method, c.xi, c.gamma));
    for &(x, y) in &c.points {
        t.push_floats(&[x, y]);
    }
    t
}

/// Writes `auto_v.csv`, `auto_s.csv`, `sgd_baseline.csv` and `slopes.json`.
pub fn cmd_theory_curves(s: &CurveSettings, out_dir: &Path) -> Result<CurveSummary> {
    let c = theory_curves(s)?;
    curve_table(&c.auto_v).write(&out_dir.join("auto_v.csv"))?;
    curve_table(&c.auto_s).write(&out_dir.join("auto_s.csv"))?;
    curve_table(&c.sgd).write(&out_dir.join("sgd_baseline.csv"))?;
    write_json(&out_dir.join("slopes.json"), &c.summary)?;
    Ok(c.summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_digits() {
        assert_eq!(six_significant(1.234567891), "1.23457");
        assert_eq!(six_significant(0.000123456789), "0.000123457");
        assert_eq!(six_significant(12345.678), "12345.7");
    }

    #[test]
    fn calibration_record_round_trips() {
        let rec = cmd_calibrate(3.0, 1e-5, 0.008533, 4688, AccountantMethod::Rdp).unwrap();
        assert!(rec.sigma > 0.5 && rec.sigma < 5.0);
        assert!((rec.eps_roundtrip - 3.0).abs() <= 0.03);
        assert!(cmd_calibrate(0.0, 1e-5, 0.01, 10, AccountantMethod::Rdp).is_err());
    }

    #[test]
    fn equivalence_and_control() {
        let r = cmd_equivalence(OptimizerKind::HeavyBall, 30, 2, 3, false).unwrap();
        assert!(r.pass, "{r:?}");
        let c = cmd_equivalence(OptimizerKind::Sgd, 30, 2, 3, true).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(require_pass(&c).is_ok());
    }

    #[test]
    fn zero_gamma_is_rejected() {
        let s = CurveSettings { gamma: 0.0, ..CurveSettings::default() };
        assert!(matches!(theory_curves(&s), Err(Error::InvalidArgument(_))));
    }
}
