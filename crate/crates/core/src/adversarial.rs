//! Adversarial objectives in minimization form, with R1 and WGAN-GP penalties.
//!
//! | kind     | discriminator loss                                   | generator loss        |
//! |----------|------------------------------------------------------|-----------------------|
//! | `ns`     | `E softplus(−D(x)) + E softplus(D(G(z)))`            | `E softplus(−D(G(z)))`|
//! | `hinge`  | `E relu(1 − D(x)) + E relu(1 + D(G(z)))`             | `−E D(G(z))`          |
//! | `was`    | `E D(G(z)) − E D(x)`                                 | `−E D(G(z))`          |
//! | `was_gp` | `was` + `λ E (‖∇D(x̄)‖ − 1)²`, `x̄` on real/fake segments | `−E D(G(z))`       |
//!
//! R1 adds `(γ/2) E_real ‖∇_x D‖²` to the `ns` discriminator loss.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::ebm::Descriptor;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Ns,
    Hinge,
    Was,
    WasGp,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Ns, LossKind::Hinge, LossKind::Was, LossKind::WasGp];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Ns => "ns",
            LossKind::Hinge => "hinge",
            LossKind::Was => "was",
            LossKind::WasGp => "was_gp",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("adversarial.loss", format!("unknown loss `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    pub loss: LossKind,
    /// R1 strength; only used with `ns`.
    pub gamma: f64,
    pub lambda_gp: f64,
    pub lr_d: f64,
    pub lr_g: f64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Ns,
            gamma: 0.0,
            lambda_gp: 10.0,
            lr_d: 1e-3,
            lr_g: 1e-3,
        }
    }
}

impl AdversarialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("adversarial.gamma", "must be finite and non-negative"));
        }
        if self.gamma > 0.0 && self.loss != LossKind::Ns {
            return Err(Error::config(
                "adversarial.gamma",
                format!("R1 is only paired with the ns loss, not {}", self.loss),
            ));
        }
        if !(self.lambda_gp >= 0.0 && self.lambda_gp.is_finite()) {
            return Err(Error::config("adversarial.lambda_gp", "must be finite and non-negative"));
        }
        if self.loss == LossKind::WasGp && self.lambda_gp <= 0.0 {
            return Err(Error::config("adversarial.lambda_gp", "was_gp needs lambda_gp > 0"));
        }
        for (name, lr) in [("adversarial.lr_d", self.lr_d), ("adversarial.lr_g", self.lr_g)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::config(name, format!("{lr} is not a valid rate")));
            }
        }
        Ok(())
    }
}

/// A loss value and its gradient with respect to one network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Discriminator loss on raw logits, with its derivatives in each logit.
pub fn d_logit_loss(kind: LossKind, real: &[f64], fake: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    let mut loss_r = 0.0;
    let mut loss_f = 0.0;
    let mut dr = Vec::with_capacity(real.len());
    let mut df = Vec::with_capacity(fake.len());
    for &s in real {
        let (l, d) = match kind {
            LossKind::Ns => (softplus(-s), -sigmoid(-s)),
            LossKind::Hinge => {
                if 1.0 - s > 0.0 {
                    (1.0 - s, -1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LossKind::Was | LossKind::WasGp => (-s, -1.0),
        };
        loss_r += l;
        dr.push(d / nr);
    }
    for &s in fake {
        let (l, d) = match kind {
            LossKind::Ns => (softplus(s), sigmoid(s)),
            LossKind::Hinge => {
                if 1.0 + s > 0.0 {
                    (1.0 + s, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LossKind::Was | LossKind::WasGp => (s, 1.0),
        };
        loss_f += l;
        df.push(d / nf);
    }
    (loss_r / nr + loss_f / nf, dr, df)
}

/// Generator loss on the logits of generated samples, with its derivatives.
pub fn g_logit_loss(kind: LossKind, fake: &[f64]) -> (f64, Vec<f64>) {
    let n = fake.len() as f64;
    let mut loss = 0.0;
    let mut d = Vec::with_capacity(fake.len());
    for &s in fake {
        let (l, g) = match kind {
            LossKind::Ns => (softplus(-s), -sigmoid(-s)),
            LossKind::Hinge | LossKind::Was | LossKind::WasGp => (-s, -1.0),
        };
        loss += l;
        d.push(g / n);
    }
    (loss / n, d)
}

fn check_pair(real: &Matrix, fake: &Matrix) -> Result<()> {
    if real.rows() == 0 || fake.rows() == 0 {
        return Err(Error::Contract("adversarial losses need non-empty batches".into()));
    }
    if real.cols() != fake.cols() {
        return Err(Error::Shape(format!(
            "real batch has dimension {}, fake batch {}",
            real.cols(),
            fake.cols()
        )));
    }
    Ok(())
}

fn ensure_finite_loss(loss: f64, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            row: 0,
            col: 0,
            context: format!("{what} evaluated to {loss}"),
        })
    }
}

fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    for (a, v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

/// `x̄_i = α_i x_real,i + (1 − α_i) x_fake,i`.
pub fn interpolate(real: &Matrix, fake: &Matrix, alphas: &[f64]) -> Result<Matrix> {
    if real.rows() != fake.rows() || real.cols() != fake.cols() || alphas.len() != real.rows() {
        return Err(Error::Shape(
            "interpolation needs equal-size real and fake batches and one alpha per pair".into(),
        ));
    }
    Ok(Matrix::from_fn(real.rows(), real.cols(), |i, j| {
        alphas[i] * real.get(i, j) + (1.0 - alphas[i]) * fake.get(i, j)
    }))
}

/// `E ‖∇_x D(x)‖²` over the batch, and its parameter gradient.
pub fn r1_penalty(d: &Descriptor, real: &Matrix) -> Result<LossGrad> {
    let g = d.net.input_grad(real)?;
    let n = real.rows() as f64;
    let mut value = 0.0;
    let mut dir = g.clone();
    for (i, row) in g.iter_rows().enumerate() {
        value += row.iter().map(|v| v * v).sum::<f64>();
        dir.row_mut(i).iter_mut().for_each(|v| *v *= 2.0 / n);
    }
    let grad = d.net.input_grad_param_grad(real, &dir)?;
    Ok(LossGrad {
        loss: value / n,
        grad,
    })
}

/// `E (‖∇_x D(x̄)‖ − 1)²` on interpolates, and its parameter gradient.
pub fn gradient_penalty(d: &Descriptor, real: &Matrix, fake: &Matrix, alphas: &[f64]) -> Result<LossGrad> {
    let xbar = interpolate(real, fake, alphas)?;
    let g = d.net.input_grad(&xbar)?;
    let n = xbar.rows() as f64;
    let mut value = 0.0;
    let mut dir = Matrix::zeros(g.rows(), g.cols());
    for (i, row) in g.iter_rows().enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        value += (norm - 1.0) * (norm - 1.0);
        if norm > 0.0 {
            let s = 2.0 * (norm - 1.0) / (norm * n);
            for (o, v) in dir.row_mut(i).iter_mut().zip(row) {
                *o = s * v;
            }
        }
    }
    let grad = d.net.input_grad_param_grad(&xbar, &dir)?;
    Ok(LossGrad {
        loss: value / n,
        grad,
    })
}

/// Discriminator loss and gradient in `θ`; interpolation weights for
/// `was_gp` are drawn from `rng`.
pub fn d_loss(cfg: &AdversarialConfig, d: &Descriptor, real: &Matrix, fake: &Matrix, rng: &mut Rng) -> Result<LossGrad> {
    let alphas = if cfg.loss == LossKind::WasGp {
        Some((0..real.rows()).map(|_| rng.random::<f64>()).collect::<Vec<_>>())
    } else {
        None
    };
    d_loss_with_alphas(cfg, d, real, fake, alphas.as_deref())
}

/// [`d_loss`] with explicit interpolation weights (required for `was_gp`).
pub fn d_loss_with_alphas(
    cfg: &AdversarialConfig,
    d: &Descriptor,
    real: &Matrix,
    fake: &Matrix,
    alphas: Option<&[f64]>,
) -> Result<LossGrad> {
    check_pair(real, fake)?;
    let s_real = d.score(real)?;
    let s_fake = d.score(fake)?;
    let (mut loss, dr, df) = d_logit_loss(cfg.loss, &s_real, &s_fake);
    let mut grad = d.net.param_grad(real, &Matrix::from_vec(dr.len(), 1, dr)?)?;
    let grad_fake = d.net.param_grad(fake, &Matrix::from_vec(df.len(), 1, df)?)?;
    axpy(&mut grad, 1.0, &grad_fake);

    if cfg.loss == LossKind::WasGp {
        let alphas = alphas
            .ok_or_else(|| Error::Contract("was_gp needs interpolation weights".into()))?;
        let gp = gradient_penalty(d, real, fake, alphas)?;
        loss += cfg.lambda_gp * gp.loss;
        axpy(&mut grad, cfg.lambda_gp, &gp.grad);
    }
    if cfg.gamma > 0.0 && cfg.loss == LossKind::Ns {
        let r1 = r1_penalty(d, real)?;
        loss += 0.5 * cfg.gamma * r1.loss;
        axpy(&mut grad, 0.5 * cfg.gamma, &r1.grad);
    }
    ensure_finite_loss(loss, "discriminator loss")?;
    Ok(LossGrad { loss, grad })
}

/// Generator loss and gradient in `φ`. Gradients flow through `D`'s input;
/// `θ` is only read.
pub fn g_loss(cfg: &AdversarialConfig, d: &Descriptor, g: &Generator, z: &Matrix) -> Result<LossGrad> {
    if z.rows() == 0 {
        return Err(Error::Contract("g_loss needs a non-empty latent batch".into()));
    }
    let g_cache = g.net.forward_cached(z)?;
    let d_cache = d.net.forward_cached(g_cache.output())?;
    let (loss, ds) = g_logit_loss(cfg.loss, d_cache.output().as_slice());
    ensure_finite_loss(loss, "generator loss")?;
    let (_, dx) = d.net.backward(&d_cache, &Matrix::from_vec(ds.len(), 1, ds)?)?;
    let (grad, _) = g.net.backward(&g_cache, &dx)?;
    Ok(LossGrad { loss, grad })
}
