//! Grid audit of the sign and monotonicity facts behind the bound.

use autoclip::theory::{envelope, f_value, lemma_audit, AuditGrid, EnvelopeMode};

fn main() -> autoclip::Result<()> {
    let report = lemma_audit(&AuditGrid::default())?;
    println!("{} checks, {} violations", report.checks, report.violations.len());

    // Lower convex envelope of f over c at a fixed S.
    let pts: Vec<(f64, f64)> =
        (0..=20).map(|k| k as f64 / 20.0).map(|c| Ok((c, f_value(c, 0.8, 0.5)?))).collect::<autoclip::Result<_>>()?;
    let lower = envelope(&pts, EnvelopeMode::LowerConvex)?;
    for (c, v) in pts.iter().step_by(4) {
        println!("c = {c:.2}: f = {v:.4}, envelope = {:.4}", lower.eval(*c).unwrap_or(f64::NAN));
    }
    Ok(())
}
