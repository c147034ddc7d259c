//! Per-sample gradients of a small MLP checked against central differences.

use autoclip::models::{per_sample_gradients, sample_losses, Activation, LossKind};
use autoclip::{Dataset, Matrix, ModelSpec, RngStream};

fn main() -> autoclip::Result<()> {
    let spec = ModelSpec::mlp(vec![3, 4, 2], Activation::Tanh, LossKind::SoftmaxCe);
    let data = Dataset::new(Matrix::from_rows(&[vec![0.2, -0.1, 0.7], vec![1.0, 0.5, -0.3]])?, vec![0.0, 1.0], "toy")?;
    let w = spec.init_params(&RngStream::new(0, "init"));
    let grads = per_sample_gradients(&spec, &w, &data)?;

    let h = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..w.len() {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[j] += h;
        down[j] -= h;
        let (lu, ld) = (sample_losses(&spec, &up, &data)?, sample_losses(&spec, &down, &data)?);
        for i in 0..data.len() {
            let fd = (lu[i] - ld[i]) / (2.0 * h);
            worst = worst.max((fd - grads.row(i)[j]).abs() / fd.abs().max(1e-3));
        }
    }
    println!("{} parameters, worst relative gap {worst:.2e}", w.len());
    Ok(())
}
