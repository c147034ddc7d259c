//! Bound curves for AUTO-V, AUTO-S and non-private SGD, and the noise-optimal step size.

use autoclip::experiments::{theory_curves, CurveSettings};
use autoclip::theory::{min_f, optimal_lr, NoiseMode, TheoryParams};

fn main() -> autoclip::Result<()> {
    let s = CurveSettings::default();
    let c = theory_curves(&s)?;
    for (t, b) in c.auto_s.points.iter().step_by(10) {
        println!("T = {t:>8.1e}: auto_s {b:.4}");
    }
    println!("slopes over [1e8, 1e12]: {:?}", (c.summary.auto_v_slope, c.summary.auto_s_slope, c.summary.sgd_baseline_slope));
    println!("smallest auto_v bound {:.4} (xi = {})", c.summary.auto_v_min, s.xi);

    println!("min_f(2, 1) = {:.6}", min_f(2.0, 1.0)?);
    let p = TheoryParams::default();
    for mode in [NoiseMode::Direct, NoiseMode::Gdp] {
        println!("{mode:?}: optimal lr {:.3e}", optimal_lr(&p, mode)?);
    }
    Ok(())
}
