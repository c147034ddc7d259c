//! Dense vectors and matrices, keyed random streams and the sampling
//! primitives used by the private-gradient pipeline.
//!
//! Every random draw in the crate goes through an [`RngStream`]: a pair of
//! a 64-bit seed and a slash-separated label. The stream for a given pair is
//! fixed, so two pipelines that ask for `"noise/step/7"` see the same draws
//! no matter what else they sampled before.

use std::ops::{Deref, DerefMut, Range};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Contiguous `f64` vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &[f64]) {
        debug_assert_eq!(self.0.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.0.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!("matrix data has {} entries, expected {rows}x{cols}", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::invalid(format!("row {i} has {} entries, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact on an empty-column matrix would panic
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Sum of all rows.
    pub fn column_sum(&self) -> Vector {
        let mut out = Vector::zeros(self.cols);
        for r in self.iter_rows() {
            out.axpy(1.0, r);
        }
        out
    }

    /// New matrix holding the selected rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Immutable descriptor of a random substream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub label: String,
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        RngStream { seed, label: label.into() }
    }

    /// Substream `"{label}/{name}"`.
    pub fn child(&self, name: impl std::fmt::Display) -> Self {
        if self.label.is_empty() {
            RngStream::new(self.seed, name.to_string())
        } else {
            RngStream::new(self.seed, format!("{}/{}", self.label, name))
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha20Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        ChaCha20Rng::from_seed(key)
    }
}

/// Ordered, disjoint half-open ranges covering `[0, d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPartition {
    ranges: Vec<Range<usize>>,
}

impl LayerPartition {
    pub fn new(ranges: Vec<Range<usize>>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("partition needs at least one range"));
        }
        let mut expected = 0;
        for r in &ranges {
            if r.start != expected || r.end <= r.start {
                return Err(Error::invalid(format!("partition range {r:?} does not continue a contiguous cover at {expected}")));
            }
            expected = r.end;
        }
        Ok(LayerPartition { ranges })
    }

    /// One range spanning `[0, dim)`.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(std::iter::once(0..dim).collect())
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect();
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::invalid(format!("partition covers {} coordinates but vector has {dim}", self.dim())));
        }
        Ok(())
    }
}

/// I.i.d. `N(0, std^2)` draws of length `dim` from `rng`.
pub fn gaussian_vector(rng: &RngStream, dim: usize, std: f64) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::invalid("gaussian_vector needs dim >= 1"));
    }
    if !std.is_finite() || std < 0.0 {
        return Err(Error::invalid(format!("noise std must be finite and >= 0, got {std}")));
    }
    let mut g = rng.generator();
    let data = (0..dim)
        .map(|_| {
            let z: f64 = g.sample(StandardNormal);
            std * z
        })
        .collect();
    Ok(Vector(data))
}

/// Indices of `0..n` kept independently with probability `p`, ascending.
pub fn poisson_subsample(rng: &RngStream, n: usize, p: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("sampling probability must lie in [0, 1], got {p}")));
    }
    let mut g = rng.generator();
    Ok((0..n).filter(|_| g.random::<f64>() < p).collect())
}

/// Euclidean norm of each partition block of `v`.
pub fn group_norms(v: &[f64], part: &LayerPartition) -> Result<Vec<f64>> {
    part.check_dim(v.len())?;
    Ok(part.ranges().iter().map(|r| norm(&v[r.clone()])).collect())
}
