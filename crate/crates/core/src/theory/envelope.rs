use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMode {
    /// Largest convex function below the samples.
    LowerConvex,
    /// Smallest concave function above the samples.
    UpperConcave,
}

/// Piecewise-linear interpolant through sorted knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Value at `x`; `None` outside the knot range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, self.xs.len() - 1);
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex or concave envelope of sampled points (monotone-chain hull).
pub fn envelope(points: &[(f64, f64)], mode: EnvelopeMode) -> Result<PiecewiseLinear> {
    if points.len() < 2 {
        return Err(Error::invalid("envelope needs at least two points"));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::invalid("envelope points must have strictly increasing x"));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::invalid("envelope points must be finite"));
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let turn = cross(hull[hull.len() - 2], hull[hull.len() - 1], p);
            let keeps = match mode {
                EnvelopeMode::LowerConvex => turn > 0.0,
                EnvelopeMode::UpperConcave => turn < 0.0,
            };
            if keeps {
                break;
            }
            hull.pop();
        }
        hull.push(p);
    }
    let (xs, ys) = hull.into_iter().unzip();
    Ok(PiecewiseLinear { xs, ys })
}
