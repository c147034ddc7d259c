//! Under AUTO-S the threshold folds into the learning rate (and weight decay);
//! under Abadi clipping it does not.

use autoclip::optim::{abadi_control_run, equivalence_pair_run, EquivalenceFixture, PairTolerance};
use autoclip::OptimizerKind;

fn main() -> autoclip::Result<()> {
    let fixture = EquivalenceFixture::logistic(0)?;
    for kind in OptimizerKind::ALL {
        let lr = if kind.is_adaptive() { 0.01 } else { 0.1 };
        let dev = equivalence_pair_run(kind, 100, 3, 0.05, lr, 1e-3, 0.01, &fixture)?;
        println!("{:>9}: R = 0.05 vs R-free deviation {dev:.2e} (tolerance {:.0e})", kind.to_string(), PairTolerance::for_kind(kind));
    }
    let dev = abadi_control_run(OptimizerKind::Sgd, 100, 3, 1.0, 0.5, 0.1, 1e-3, &fixture)?;
    println!("abadi R = 1 vs R = 0.5 with the same rescaling: deviation {dev:.2e}");
    Ok(())
}
