//! DP-SGD with AUTO-S on a two-Gaussian problem, noise calibrated up front.

use autoclip::accountant::epsilon;
use autoclip::models::{accuracy, gen_synthetic, SyntheticKind};
use autoclip::{calibrate_sigma, AccountantMethod, ClipPolicy, DpTrainer, ModelSpec, OptimizerConfig, OptimizerKind, PrivacySpec};

fn main() -> autoclip::Result<()> {
    let train = gen_synthetic(SyntheticKind::Gauss2Class, 1, 5_000, 10, &[0.5])?;
    let test = gen_synthetic(SyntheticKind::Gauss2Class, 2, 2_000, 10, &[0.5])?;
    let spec = ModelSpec::logistic(10);

    let p = 256.0 / train.len() as f64;
    let steps = (5.0 / p).round() as u64;
    let sigma = calibrate_sigma(&PrivacySpec::new(3.0, 1e-5, p, steps)?, AccountantMethod::Rdp)?;
    println!("p {p:.4}, {steps} steps, sigma {sigma:.4}");

    let opt = OptimizerConfig::new(OptimizerKind::Sgd, 1.0);
    let mut trainer = DpTrainer::new(&spec, &train, ClipPolicy::auto_s(1.0, 0.01), opt, sigma, p, 0)?;
    for report in trainer.run(steps as usize)? {
        if report.step % 20 == 0 {
            println!(
                "step {:>3}: batch {:>3} mean |g| {:.3} clipped {:.2}",
                report.step, report.batch_size, report.grad_norm_mean, report.clip_fraction
            );
        }
    }
    println!("test accuracy {:.4}", accuracy(&spec, trainer.params(), &test)?);
    println!("spent eps {:.4}", epsilon(AccountantMethod::Rdp, sigma, p, steps, 1e-5)?);
    Ok(())
}
