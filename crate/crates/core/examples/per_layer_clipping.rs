//! Clipping each parameter group separately.

use autoclip::dp::noise_to_signal;
use autoclip::{clip_and_sum, ClipPolicy, ClipRule, LayerPartition, Matrix, Thresholds};

fn main() -> autoclip::Result<()> {
    let part = LayerPartition::from_sizes(&[2, 3])?;
    let grads = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 2.0, 0.0], vec![0.0, 0.5, 3.0, 0.0, 4.0]])?;

    let uniform = ClipPolicy::per_layer(ClipRule::AutoS { r: 1.0, gamma: 0.01 }, part.clone(), Thresholds::Uniform(1.0))?;
    println!("uniform per-layer thresholds {:?}", uniform.layer_thresholds()?);
    println!("sensitivity {:.4}", uniform.sensitivity()?);
    println!("clipped sum {:?}", clip_and_sum(&uniform, &grads)?.sum.as_slice());

    // Unequal thresholds change each group's noise-to-signal ratio.
    let explicit = ClipPolicy::per_layer(ClipRule::Abadi { r: 1.0 }, part, Thresholds::Explicit(vec![9.0, 12.0]))?;
    println!("explicit sensitivity {:.4}", explicit.sensitivity()?);
    println!("noise/signal per group {:?}", noise_to_signal(&[9.0, 12.0], 1.0)?);
    Ok(())
}
