//! Noise multiplier for a budget under both accountants.

use autoclip::accountant::epsilon;
use autoclip::{calibrate_sigma, gdp_epsilon, gdp_mu, AccountantMethod, PrivacySpec};

fn main() -> autoclip::Result<()> {
    let n = 60_000;
    let spec = PrivacySpec::new(3.0, 1e-5, 256.0 / n as f64, 2_344)?;
    for method in [AccountantMethod::Rdp, AccountantMethod::Gdp] {
        let sigma = calibrate_sigma(&spec, method)?;
        let back = epsilon(method, sigma, spec.sample_rate, spec.steps, spec.delta)?;
        println!("{method}: sigma {sigma:.4}, re-accounted eps {back:.4}");
    }
    if let Some(w) = spec.delta_warning(n) {
        println!("warning: {w}");
    }

    let mu = gdp_mu(1.0, spec.sample_rate, spec.steps)?;
    println!("sigma = 1: mu {mu:.4}, eps {:.4}", gdp_epsilon(mu, spec.delta)?);
    Ok(())
}
