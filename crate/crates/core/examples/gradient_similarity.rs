//! How well clipped batch gradients align with the true one, against the
//! best non-private reweighting.

use autoclip::experiments::{similarity_default_data, similarity_trace};
use autoclip::ModelSpec;

fn main() -> autoclip::Result<()> {
    let data = similarity_default_data(0)?;
    let rows = similarity_trace(&ModelSpec::logistic(10), &data, 40, 0.1, 0.5, 0.032, 0)?;
    for r in rows.iter().step_by(5) {
        let s = &r.similarity;
        println!(
            "step {:>2}: abadi {:>8.3} auto_v {:>8.3} oracle {:>8.3} aligned {:.2}",
            r.step, s.dot_abadi, s.dot_auto_v, s.dot_oracle, s.frac_positive_alignment
        );
    }
    Ok(())
}
