//! Dot-product similarity between clipped and unclipped batch gradients.

use serde::{Deserialize, Serialize};

use crate::dp::{clip_factor, ClipRule};
use crate::error::{Error, Result};
use crate::models::{per_sample_gradients, Dataset, ModelSpec};
use crate::numeric::{dot, norm, poisson_subsample, Matrix, RngStream};

use super::output::CsvTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub dot_abadi: f64,
    pub dot_auto_v: f64,
    /// Best achievable under `0 <= C_i <= R / |g_i|` (uses the batch sum, so not private).
    pub dot_oracle: f64,
    pub frac_positive_alignment: f64,
}

/// `R / |g_i|` where `g_i` points along the batch sum, else `0`.
pub fn oracle_factors(grads: &Matrix, r: f64) -> Vec<f64> {
    let total = grads.column_sum();
    grads.iter_rows().map(|g| if dot(g, &total) > 0.0 { r / norm(g) } else { 0.0 }).collect()
}

fn weighted_dot(grads: &Matrix, factors: impl Iterator<Item = f64>, total: &[f64]) -> f64 {
    grads.iter_rows().zip(factors).map(|(g, c)| c * dot(g, total)).sum()
}

/// `<sum_i C_i g_i, sum_j g_j>` for Abadi, AUTO-V and the oracle factors.
pub fn dot_similarity(grads: &Matrix, r: f64) -> Result<Similarity> {
    if grads.rows() == 0 {
        return Err(Error::invalid("similarity needs a non-empty batch"));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("threshold must be > 0"));
    }
    let total = grads.column_sum();
    let norms: Vec<f64> = grads.iter_rows().map(norm).collect();
    let with_rule = |rule: ClipRule| weighted_dot(grads, norms.iter().map(|&n| clip_factor(&rule, n)), &total);
    let positive = grads.iter_rows().filter(|g| dot(g, &total) > 0.0).count();
    Ok(Similarity {
        dot_abadi: with_rule(ClipRule::Abadi { r }),
        dot_auto_v: with_rule(ClipRule::AutoV { r }),
        dot_oracle: weighted_dot(grads, oracle_factors(grads, r).into_iter(), &total),
        frac_positive_alignment: positive as f64 / grads.rows() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub step: usize,
    #[serde(flatten)]
    pub similarity: Similarity,
}

/// Similarity along a non-private SGD trajectory (mean gradient, step `lr`).
pub fn similarity_trace(
    spec: &ModelSpec,
    data: &Dataset,
    steps: usize,
    r: f64,
    lr: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<Vec<SimilarityRow>> {
    data.validate_for(spec)?;
    let mut w = spec.init_params(&RngStream::new(seed, "init"));
    let mut rows = Vec::with_capacity(steps);
    for t in 1..=steps {
        let idx = poisson_subsample(&RngStream::new(seed, format!("sample/step/{t}")), data.len(), sample_rate)?;
        if idx.is_empty() {
            continue;
        }
        let grads = per_sample_gradients(spec, &w, &data.subset(&idx)?)?;
        rows.push(SimilarityRow { step: t, similarity: dot_similarity(&grads, r)? });
        let g = grads.column_sum();
        w.axpy(-lr / idx.len() as f64, &g);
    }
    Ok(rows)
}

/// Logistic for `+-1` labels, softmax for class indices, least squares otherwise.
pub fn infer_model(data: &Dataset) -> ModelSpec {
    let m = data.width();
    if data.labels.iter().all(|&y| y == 1.0 || y == -1.0) {
        ModelSpec::logistic(m)
    } else if data.labels.iter().all(|&y| y >= 0.0 && y.fract() == 0.0 && y < 1e6) {
        let classes = data.labels.iter().fold(0.0f64, |a, &y| a.max(y)) as usize + 1;
        ModelSpec::softmax(m, classes.max(2))
    } else {
        ModelSpec::linear(m)
    }
}

/// Default data for the similarity trace: a 10-d two-Gaussian problem.
pub fn similarity_default_data(seed: u64) -> Result<Dataset> {
    crate::models::gen_synthetic(crate::models::SyntheticKind::Gauss2Class, seed, 1000, 10, &[0.5])
}

pub fn similarity_table(rows: &[SimilarityRow]) -> CsvTable {
    let mut t = CsvTable::new(["step", "dot_abadi", "dot_auto_v", "frac_positive_alignment"]);
    for r in rows {
        let s = &r.similarity;
        let mut row = vec![r.step.to_string()];
        row.extend([s.dot_abadi, s.dot_auto_v, s.frac_positive_alignment].map(super::output::format_float));
        t.push(row);
    }
    t
}
