//! The descriptor as an energy-based model `p_θ(x) ∝ exp[D_θ(x)]`.
//!
//! `D_θ` is a scalar-output [`Mlp`]. During cooperative training its output
//! is a score (negative energy); during adversarial training the same output
//! is read as the discriminator logit.

use rand::Rng as _;

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub net: Mlp,
}

impl Descriptor {
    pub fn new(net: Mlp) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Contract(format!(
                "descriptor needs output_dim 1, got {}",
                net.output_dim()
            )));
        }
        Ok(Self { net })
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    /// `D_θ(x_i)` for every row.
    pub fn score(&self, batch: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.forward(batch)?.into_vec())
    }

    /// `(1/n) Σ ∇_θ D(x_i)` with per-sample weight `weight_i` (unit if `None`).
    pub fn mean_param_grad(&self, batch: &Matrix, weights: Option<&[f64]>) -> Result<Vec<f64>> {
        let n = batch.rows();
        let upstream = match weights {
            Some(w) => Matrix::from_vec(n, 1, w.to_vec())?,
            None => Matrix::from_vec(n, 1, vec![1.0 / n as f64; n])?,
        };
        self.net.param_grad(batch, &upstream)
    }

    /// Monte-Carlo log-likelihood gradient:
    /// `(1/n_r) Σ ∇_θ D(x_i) − (1/n_s) Σ ∇_θ D(x̃_i)`.
    ///
    /// This is an ascent direction; the trainer steps along it.
    pub fn mle_gradient(&self, real: &Matrix, synth: &Matrix) -> Result<Vec<f64>> {
        if real.rows() == 0 || synth.rows() == 0 {
            return Err(Error::Contract("mle_gradient needs non-empty batches".into()));
        }
        if real.cols() != synth.cols() {
            return Err(Error::Shape(format!(
                "real batch has dimension {}, synthesized batch {}",
                real.cols(),
                synth.cols()
            )));
        }
        // Separate passes so identical batches cancel exactly.
        let pos = self.mean_param_grad(real, None)?;
        let neg = self.mean_param_grad(synth, None)?;
        Ok(pos.iter().zip(&neg).map(|(p, q)| p - q).collect())
    }
}

/// A uniform 1D grid `{lo + (j + 1/2)·Δ}` used for exact enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Largest normalized mass tolerated in the two boundary bins.
    pub boundary_tolerance: f64,
}

impl GridSpec {
    pub const MIN_BINS: usize = 256;

    pub fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Self {
            lo,
            hi,
            bins,
            boundary_tolerance: 1e-6,
        }
    }

    pub fn with_boundary_tolerance(mut self, tol: f64) -> Self {
        self.boundary_tolerance = tol;
        self
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn points(&self) -> Matrix {
        let w = self.width();
        Matrix::from_fn(self.bins, 1, |j, _| self.lo + (j as f64 + 0.5) * w)
    }
}

/// The descriptor's Gibbs distribution discretized on a grid.
#[derive(Debug, Clone)]
pub struct GibbsGrid {
    pub points: Matrix,
    pub probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl GibbsGrid {
    pub fn new(d: &Descriptor, grid: GridSpec) -> Result<Self> {
        if d.dim() != 1 {
            return Err(Error::Contract("grid enumeration is one-dimensional".into()));
        }
        if grid.bins < GridSpec::MIN_BINS || !(grid.hi > grid.lo) {
            return Err(Error::Contract(format!(
                "grid needs hi > lo and at least {} bins",
                GridSpec::MIN_BINS
            )));
        }
        let points = grid.points();
        let scores = d.score(&points)?;
        let probs = normalize_log_weights(&scores);
        let edge = probs[0] + probs[probs.len() - 1];
        if edge > grid.boundary_tolerance {
            return Err(Error::GridTooCoarse {
                mass: edge,
                limit: grid.boundary_tolerance,
            });
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { points, probs, cdf })
    }

    /// Inverse-CDF draws of grid points.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Matrix {
        let total = *self.cdf.last().unwrap();
        Matrix::from_fn(n, 1, |_, _| {
            let u: f64 = rng.random::<f64>() * total;
            let j = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
            self.points.get(j, 0)
        })
    }
}

fn normalize_log_weights(logw: &[f64]) -> Vec<f64> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Exact log-likelihood gradient `E_data[∇_θ D] − E_{p_θ}[∇_θ D]` for a 1D
/// descriptor, both expectations taken by enumeration over `grid` with the
/// densities normalized on the grid.
pub fn exact_loglik_grad_oracle(d: &Descriptor, spec: &DatasetSpec, grid: GridSpec) -> Result<Vec<f64>> {
    if spec.dim() != 1 {
        return Err(Error::Contract("exact oracle needs a one-dimensional dataset".into()));
    }
    let centers = spec.mode_centers();
    let (cmin, cmax) = centers
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let margin = 6.0 * spec.sigma();
    if grid.lo > cmin - margin || grid.hi < cmax + margin {
        return Err(Error::Contract(format!(
            "grid [{}, {}] must extend 6σ beyond the modes [{cmin}, {cmax}]",
            grid.lo, grid.hi
        )));
    }
    let gibbs = GibbsGrid::new(d, grid)?;
    let data_logp: Vec<f64> = gibbs
        .points
        .iter_rows()
        .map(|x| spec.log_density(x))
        .collect();
    let data_probs = normalize_log_weights(&data_logp);
    let weights: Vec<f64> = data_probs
        .iter()
        .zip(&gibbs.probs)
        .map(|(p, q)| p - q)
        .collect();
    d.mean_param_grad(&gibbs.points, Some(&weights))
}
