//! Short-run unadjusted Langevin revision of samples under a descriptor:
//! `x ← x + η ∇_x D(x) + ε`, `ε ~ N(0, 2η I)` (per-coordinate std `√(2η)`).

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ebm::Descriptor;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub eta: f64,
    pub steps: usize,
    pub noise_enabled: bool,
    pub rng_seed: u64,
    /// Per-sample L2 clip applied to `∇_x D` before stepping.
    #[serde(default)]
    pub grad_clip: Option<f64>,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            steps: 10,
            noise_enabled: true,
            rng_seed: 0,
            grad_clip: None,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config("langevin.eta", format!("{} must be positive", self.eta)));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config("langevin.grad_clip", "must be positive"));
            }
        }
        Ok(())
    }
}

/// One Langevin step. The input is left untouched.
pub fn langevin_step(
    d: &Descriptor,
    x: &Matrix,
    eta: f64,
    noise: bool,
    grad_clip: Option<f64>,
    rng: &mut Rng,
) -> Result<Matrix> {
    let mut grad = d.net.input_grad(x)?;
    grad.ensure_finite("langevin input gradient")?;
    if let Some(limit) = grad_clip {
        for i in 0..grad.rows() {
            let row = grad.row_mut(i);
            let norm = row.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > limit {
                let s = limit / norm;
                row.iter_mut().for_each(|g| *g *= s);
            }
        }
    }
    let noise_std = (2.0 * eta).sqrt();
    let mut out = x.clone();
    for (v, g) in out.as_mut_slice().iter_mut().zip(grad.as_slice()) {
        *v += eta * g;
        if noise {
            let e: f64 = StandardNormal.sample(rng);
            *v += noise_std * e;
        }
    }
    out.ensure_finite("langevin state")?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub samples: Matrix,
    /// Every state from `x_0` to `x_T` when tracing was requested.
    pub trace: Option<Vec<Matrix>>,
}

/// Runs `cfg.steps` Langevin steps with a generator seeded from `cfg.rng_seed`.
pub fn run_chain(d: &Descriptor, x0: &Matrix, cfg: &LangevinConfig, trace: bool) -> Result<ChainOutput> {
    let mut rng = rng::stream(cfg.rng_seed, 0);
    run_chain_with_rng(d, x0, cfg, trace, &mut rng)
}

/// As [`run_chain`], drawing noise from the caller's generator.
pub fn run_chain_with_rng(
    d: &Descriptor,
    x0: &Matrix,
    cfg: &LangevinConfig,
    trace: bool,
    rng: &mut Rng,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let mut states = trace.then(|| vec![x0.clone()]);
    let mut x = x0.clone();
    for _ in 0..cfg.steps {
        x = langevin_step(d, &x, cfg.eta, cfg.noise_enabled, cfg.grad_clip, rng)?;
        if let Some(s) = states.as_mut() {
            s.push(x.clone());
        }
    }
    Ok(ChainOutput {
        samples: x,
        trace: states,
    })
}

/// Writes a trace as `step,sample,x0,x1,...` rows.
pub fn write_trace_csv<W: Write>(trace: &[Matrix], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = trace.first().map_or(0, |m| m.cols());
    let mut header = vec!["step".to_owned(), "sample".to_owned()];
    header.extend((0..dim).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (step, state) in trace.iter().enumerate() {
        for (i, row) in state.iter_rows().enumerate() {
            let mut rec = vec![step.to_string(), i.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.9e}")));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}
