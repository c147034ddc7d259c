//! Per-sample clipping factors and the privatized sum for each rule.

use autoclip::{clip_and_sum, privatize, ClipPolicy, Matrix, RngStream};

fn main() -> autoclip::Result<()> {
    let grads = Matrix::from_rows(&[vec![3.0, 4.0], vec![0.03, 0.04], vec![-6.0, 8.0]])?;
    let policies = [
        ("abadi", ClipPolicy::abadi(0.5)),
        ("auto_v", ClipPolicy::auto_v(0.5)),
        ("auto_s", ClipPolicy::auto_s(0.5, 0.01)),
        ("auto_s_free", ClipPolicy::auto_s_free(0.01)),
    ];
    for (name, policy) in &policies {
        let c = clip_and_sum(policy, &grads)?;
        println!("{name:>12}: factors {:?} sum {:?} clipped {:.2}", c.factors, c.sum.as_slice(), c.clip_fraction);
    }

    // Same unit noise for every policy; only the scale differs.
    let rng = RngStream::new(7, "noise/step/1");
    for (name, policy) in &policies {
        let p = privatize(policy, &grads, 1.0, &rng)?;
        println!("{name:>12}: noise std {:.3} private sum {:?}", p.noise_std_used, p.grad.as_slice());
    }
    Ok(())
}
