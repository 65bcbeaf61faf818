//! Latent prior, ancestral sampling and the MCMC-teaching regression.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::Mlp;
use crate::rng::Rng;

/// Standard normal prior over the latent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPrior {
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub net: Mlp,
    pub prior: LatentPrior,
}

impl Generator {
    pub fn new(net: Mlp) -> Self {
        let prior = LatentPrior {
            dim: net.input_dim(),
        };
        Self { net, prior }
    }

    pub fn data_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn sample_latents(&self, n: usize, rng: &mut Rng) -> Result<Matrix> {
        if n == 0 {
            return Err(Error::Contract("sample_latents needs n >= 1".into()));
        }
        Ok(Matrix::from_fn(n, self.prior.dim, |_, _| {
            StandardNormal.sample(rng)
        }))
    }

    pub fn generate(&self, z: &Matrix) -> Result<Matrix> {
        self.net.forward(z)
    }

    /// Draws latents and maps them through the network.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Result<Matrix> {
        let z = self.sample_latents(n, rng)?;
        self.generate(&z)
    }

    /// `(1/n) Σ ‖x̃_i − G(z_i)‖²` and its gradient in the generator parameters.
    /// `revised` is a constant target.
    pub fn teaching_loss_grad(&self, z: &Matrix, revised: &Matrix) -> Result<(f64, Vec<f64>)> {
        if revised.rows() != z.rows() || revised.cols() != self.data_dim() {
            return Err(Error::Shape(format!(
                "targets are {}x{}, generator produces {}x{}",
                revised.rows(),
                revised.cols(),
                z.rows(),
                self.data_dim()
            )));
        }
        let cache = self.net.forward_cached(z)?;
        let n = z.rows() as f64;
        let mut upstream = cache.output().clone();
        let mut loss = 0.0;
        for (u, t) in upstream.as_mut_slice().iter_mut().zip(revised.as_slice()) {
            let diff = *u - t;
            loss += diff * diff;
            *u = 2.0 * diff / n;
        }
        let (grad, _) = self.net.backward(&cache, &upstream)?;
        Ok((loss / n, grad))
    }
}
