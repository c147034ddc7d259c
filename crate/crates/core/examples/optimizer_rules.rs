//! One update of each rule from the same state.

use autoclip::{Optimizer, OptimizerConfig, OptimizerKind};

fn main() -> autoclip::Result<()> {
    let grads = [[1.0, -2.0], [0.5, -1.0], [0.25, 0.5]];
    for kind in OptimizerKind::ALL {
        let config = OptimizerConfig::new(kind, 0.1).with_weight_decay(0.01);
        let mut opt = Optimizer::new(config, 2)?;
        let mut w = vec![1.0, 1.0];
        for g in &grads {
            opt.step(&mut w, g)?;
        }
        println!("{:>9} (decoupled decay: {:>5}): w = [{:+.6}, {:+.6}]", kind.to_string(), config.is_decoupled(), w[0], w[1]);
    }
    Ok(())
}
