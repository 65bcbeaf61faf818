//! Equal-weight isotropic Gaussian mixtures with known centers and exact densities.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetKind {
    /// `k` modes evenly spaced on a circle, the first on the positive x axis.
    GaussianRing { k: usize, radius: f64, sigma: f64 },
    /// `rows x cols` lattice centered on the origin.
    GaussianGrid {
        rows: usize,
        cols: usize,
        spacing: f64,
        sigma: f64,
    },
    /// `k` modes on the real line, centered on the origin.
    GaussianLine1d { k: usize, spacing: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    #[serde(flatten)]
    pub kind: DatasetKind,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn ring(k: usize, radius: f64, sigma: f64) -> Self {
        Self {
            kind: DatasetKind::GaussianRing { k, radius, sigma },
            seed: 0,
        }
    }

    pub fn grid(rows: usize, cols: usize, spacing: f64, sigma: f64) -> Self {
        Self {
            kind: DatasetKind::GaussianGrid {
                rows,
                cols,
                spacing,
                sigma,
            },
            seed: 0,
        }
    }

    pub fn line_1d(k: usize, spacing: f64, sigma: f64) -> Self {
        Self {
            kind: DatasetKind::GaussianLine1d { k, spacing, sigma },
            seed: 0,
        }
    }

    /// The eight-mode ring used by the flagship comparison.
    pub fn canonical_ring() -> Self {
        Self::ring(8, 2.0, 0.05)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    format!("dataset.{field}"),
                    format!("{v} must be positive"),
                ))
            }
        };
        let count = |field: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(format!("dataset.{field}"), "must be at least 1"))
            }
        };
        match self.kind {
            DatasetKind::GaussianRing { k, radius, sigma } => {
                count("k", k)?;
                positive("radius", radius)?;
                positive("sigma", sigma)
            }
            DatasetKind::GaussianGrid {
                rows,
                cols,
                spacing,
                sigma,
            } => {
                count("rows", rows)?;
                count("cols", cols)?;
                positive("spacing", spacing)?;
                positive("sigma", sigma)
            }
            DatasetKind::GaussianLine1d { k, spacing, sigma } => {
                count("k", k)?;
                positive("spacing", spacing)?;
                positive("sigma", sigma)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DatasetKind::GaussianLine1d { .. } => 1,
            _ => 2,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self.kind {
            DatasetKind::GaussianRing { sigma, .. }
            | DatasetKind::GaussianGrid { sigma, .. }
            | DatasetKind::GaussianLine1d { sigma, .. } => sigma,
        }
    }

    pub fn mode_count(&self) -> usize {
        match self.kind {
            DatasetKind::GaussianRing { k, .. } | DatasetKind::GaussianLine1d { k, .. } => k,
            DatasetKind::GaussianGrid { rows, cols, .. } => rows * cols,
        }
    }

    /// Mixture centers in a fixed order, one row each.
    pub fn mode_centers(&self) -> Matrix {
        match self.kind {
            DatasetKind::GaussianRing { k, radius, .. } => Matrix::from_fn(k, 2, |i, j| {
                let angle = 2.0 * PI * i as f64 / k as f64;
                if j == 0 {
                    radius * angle.cos()
                } else {
                    radius * angle.sin()
                }
            }),
            DatasetKind::GaussianGrid {
                rows,
                cols,
                spacing,
                ..
            } => Matrix::from_fn(rows * cols, 2, |i, j| {
                let (r, c) = (i / cols, i % cols);
                if j == 0 {
                    (c as f64 - (cols as f64 - 1.0) / 2.0) * spacing
                } else {
                    (r as f64 - (rows as f64 - 1.0) / 2.0) * spacing
                }
            }),
            DatasetKind::GaussianLine1d { k, spacing, .. } => {
                Matrix::from_fn(k, 1, |i, _| (i as f64 - (k as f64 - 1.0) / 2.0) * spacing)
            }
        }
    }

    /// `n` i.i.d. draws: a uniformly chosen center plus `sigma`-scaled noise.
    pub fn sample_batch(&self, n: usize, rng: &mut Rng) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::Contract("sample_batch needs n >= 1".into()));
        }
        self.validate()?;
        let centers = self.mode_centers();
        let sigma = self.sigma();
        let d = self.dim();
        let mut out = Matrix::zeros(n, d);
        for i in 0..n {
            let c = centers.row(rng.random_range(0..centers.rows()));
            for (x, mu) in out.row_mut(i).iter_mut().zip(c) {
                let e: f64 = StandardNormal.sample(rng);
                *x = mu + sigma * e;
            }
        }
        Ok(out)
    }

    /// Exact log density of the mixture at `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let centers = self.mode_centers();
        let sigma = self.sigma();
        let d = self.dim() as f64;
        let norm = -0.5 * d * (2.0 * PI * sigma * sigma).ln();
        let logs: Vec<f64> = centers
            .iter_rows()
            .map(|c| {
                let sq: f64 = c.iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
                norm - 0.5 * sq / (sigma * sigma)
            })
            .collect();
        log_sum_exp(&logs) - (centers.rows() as f64).ln()
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
