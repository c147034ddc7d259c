use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{Matrix, RngStream};

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// One feature, `x ~ N(y, 1)` with balanced labels in {-1, +1}.
    LogisticLazy,
    /// No features; the label is the sample `x ~ N(+-4, 1)`, fit by a bias-only linear model.
    MeanEst,
    /// `x ~ N(y * means, I)` in `dims` dimensions, labels in {-1, +1}.
    #[serde(rename = "gauss2class")]
    Gauss2Class,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic_lazy" => Ok(SyntheticKind::LogisticLazy),
            "mean_est" => Ok(SyntheticKind::MeanEst),
            "gauss2class" => Ok(SyntheticKind::Gauss2Class),
            other => Err(Error::invalid(format!("unknown synthetic dataset kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub seed: u64,
    pub n_per_class: usize,
    #[serde(default = "default_dims")]
    pub dims: usize,
    /// Class mean offsets; a single value is broadcast over `dims`.
    #[serde(default)]
    pub means: Vec<f64>,
}

fn default_dims() -> usize {
    1
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, seed: u64, n_per_class: usize) -> Self {
        SyntheticSpec { kind, seed, n_per_class, dims: 1, means: Vec::new() }
    }

    pub fn gauss2class(seed: u64, n_per_class: usize, dims: usize, means: Vec<f64>) -> Self {
        SyntheticSpec { kind: SyntheticKind::Gauss2Class, seed, n_per_class, dims, means }
    }

    pub fn generate(&self) -> Result<Dataset> {
        gen_synthetic(self.kind, self.seed, self.n_per_class, self.dims, &self.means)
    }
}

/// Seeded synthetic datasets; rows are shuffled, class counts are exact.
pub fn gen_synthetic(kind: SyntheticKind, seed: u64, n_per_class: usize, dims: usize, means: &[f64]) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    let rng = RngStream::new(seed, format!("data/{kind:?}"));
    let mut g = rng.generator();
    let n = 2 * n_per_class;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng.child("shuffle").generator());
    let class_of = |i: usize| if i < n_per_class { 1.0 } else { -1.0 };

    match kind {
        SyntheticKind::LogisticLazy => {
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for &i in &order {
                let label = class_of(i);
                let z: f64 = g.sample(StandardNormal);
                x.push(label + z);
                y.push(label);
            }
            Dataset::new(Matrix::from_vec(n, 1, x)?, y, "logistic_lazy")
        }
        SyntheticKind::MeanEst => {
            let y = order
                .iter()
                .map(|&i| {
                    let z: f64 = g.sample(StandardNormal);
                    4.0 * class_of(i) + z
                })
                .collect();
            Dataset::new(Matrix::zeros(n, 0), y, "mean_est")
        }
        SyntheticKind::Gauss2Class => {
            if dims == 0 {
                return Err(Error::invalid("gauss2class needs dims >= 1"));
            }
            let mu: Vec<f64> = match means.len() {
                0 => vec![1.0; dims],
                1 => vec![means[0]; dims],
                l if l == dims => means.to_vec(),
                l => return Err(Error::invalid(format!("{l} means given for {dims} dimensions"))),
            };
            let mut x = Vec::with_capacity(n * dims);
            let mut y = Vec::with_capacity(n);
            for &i in &order {
                let label = class_of(i);
                for m in &mu {
                    let z: f64 = g.sample(StandardNormal);
                    x.push(label * m + z);
                }
                y.push(label);
            }
            Dataset::new(Matrix::from_vec(n, dims, x)?, y, "gauss2class")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_logistic_counts_and_means() {
        let d = gen_synthetic(SyntheticKind::LogisticLazy, 0, 10_000, 1, &[]).unwrap();
        let pos: Vec<f64> = (0..d.len()).filter(|&i| d.labels[i] == 1.0).map(|i| d.features.row(i)[0]).collect();
        assert_eq!(pos.len(), 10_000);
        assert_eq!(d.len(), 20_000);
        let mean = pos.iter().sum::<f64>() / pos.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn mean_estimation_is_centered() {
        let d = gen_synthetic(SyntheticKind::MeanEst, 4, 10_000, 1, &[]).unwrap();
        assert_eq!(d.width(), 0);
        let mean = d.labels.iter().sum::<f64>() / d.len() as f64;
        assert!(mean.abs() < 0.1, "{mean}");
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SyntheticSpec::gauss2class(3, 50, 4, vec![0.5]).generate().unwrap();
        let b = SyntheticSpec::gauss2class(3, 50, 4, vec![0.5]).generate().unwrap();
        assert_eq!(a, b);
        let c = SyntheticSpec::gauss2class(4, 50, 4, vec![0.5]).generate().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn serde_names_match_parsing() {
        for k in [SyntheticKind::LogisticLazy, SyntheticKind::MeanEst, SyntheticKind::Gauss2Class] {
            let name = serde_json::to_string(&k).unwrap();
            assert_eq!(name.trim_matches('"').parse::<SyntheticKind>().unwrap(), k);
        }
    }

    #[test]
    fn unknown_kind_and_bad_sizes() {
        assert!("blobs".parse::<SyntheticKind>().is_err());
        assert!(gen_synthetic(SyntheticKind::Gauss2Class, 0, 0, 2, &[]).is_err());
        assert!(gen_synthetic(SyntheticKind::Gauss2Class, 0, 5, 3, &[1.0, 2.0]).is_err());
    }
}
