//! Where normalized clipping stops moving: batch gradients over a parameter grid.

use autoclip::experiments::{lazy_region, theta_grid, LazySetting};

fn main() -> autoclip::Result<()> {
    for setting in [LazySetting::Logistic, LazySetting::Mean] {
        let (r, gamma) = (setting.default_r(), setting.default_gamma());
        println!("{setting:?} (R = {r}, gamma = {gamma}); clipped sums divided by R");
        println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "theta", "standard", "abadi", "auto_v", "auto_s");
        for row in lazy_region(setting, r, gamma, &theta_grid(-2.0, 2.0, 17)?, 0)? {
            let n = row.per_unit_threshold(r);
            println!("{:>6.2} {:>12.2} {:>12.2} {:>12.2} {:>12.2}", n.theta, n.standard, n.abadi, n.auto_v, n.auto_s);
        }
    }
    Ok(())
}
