//! The acceptance criteria as reusable checks. Each returns a verdict with
//! the numbers it was decided on.

use coopinit::adversarial::{self, LossKind};
use coopinit::config::RunConfig;
use coopinit::ebm::{exact_loglik_grad_oracle, GibbsGrid, GridSpec};
use coopinit::langevin::{self, LangevinConfig};
use coopinit::persistence;
use coopinit::rng;
use coopinit::trainer::{self, RunRecord, Stage, TrainerState};
use coopinit::{
    Activation, DatasetSpec, Descriptor, Generator, Matrix, Mlp, MlpConfig, Result, RunSetup,
};

use statrs::distribution::{ContinuousCDF, Normal};

use super::rel_err;

#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    pub fn all(parts: &[Verdict]) -> Self {
        Self {
            pass: parts.iter().all(|v| v.pass),
            detail: parts
                .iter()
                .map(|v| v.detail.as_str())
                .collect::<Vec<_>>()
                .join("; "),
        }
    }
}

// ---- flagship runs ----------------------------------------------------------

pub const FLAGSHIP_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// The flagship config with one seed and the given cooperative share.
pub fn flagship(seed: u64, ncoop_frac: f64) -> RunConfig {
    let mut cfg = RunConfig::flagship();
    cfg.seed = seed;
    cfg.schedule.ncoop_frac = ncoop_frac;
    cfg
}

/// Final `modes_covered` of a full run.
pub fn final_modes(cfg: &RunConfig) -> Result<usize> {
    let out = trainer::run(&cfg.resolve()?, &mut ())?;
    Ok(out.records.last().map_or(0, |r| r.modes_covered))
}

pub fn mean(v: &[usize]) -> f64 {
    v.iter().sum::<usize>() as f64 / v.len() as f64
}

pub fn mode_coverage_verdict(coop: &[usize], plain: &[usize]) -> Verdict {
    let good = coop.iter().filter(|&&m| m >= 7).count();
    let gap = mean(coop) - mean(plain);
    Verdict::new(
        good >= 4 && gap >= 1.0,
        format!(
            "coop modes {coop:?} ({good}/5 with >= 7), plain {plain:?}, mean gap {gap:.2} (need 4/5 and >= 1.0)"
        ),
    )
}

// ---- gradient unbiasedness --------------------------------------------------

pub fn line_dataset() -> DatasetSpec {
    DatasetSpec::line_1d(3, 2.0, 0.5)
}

/// A random tanh descriptor whose Gibbs density is confined enough to
/// enumerate on `[-8, 8]`.
pub fn confined_descriptor(seed: u64) -> Descriptor {
    let cfg = MlpConfig::new(1, vec![8], 1, Activation::Tanh, seed).with_quadratic_confinement(1.0);
    let mut net = Mlp::new(cfg).unwrap();
    // Random biases so no coordinate of the gradient is trivially symmetric.
    let mut r = rng::stream(seed, 7);
    let offset = net.output_bias_offset();
    for (k, p) in net.params_mut().iter_mut().enumerate() {
        if k != offset {
            *p += 0.3 * super::normal(&mut r);
        }
    }
    Descriptor::new(net).unwrap()
}

pub fn gradient_unbiasedness(seed: u64) -> Result<Verdict> {
    const N: usize = 100_000;
    const BATCHES: usize = 100;
    let spec = line_dataset();
    let d = confined_descriptor(seed);
    let coarse = exact_loglik_grad_oracle(&d, &spec, GridSpec::new(-8.0, 8.0, 512))?;
    let grid = GridSpec::new(-8.0, 8.0, 1024);
    let oracle = exact_loglik_grad_oracle(&d, &spec, grid)?;
    let refinement = rel_err(&coarse, &oracle);

    let gibbs = GibbsGrid::new(&d, grid)?;
    let mut r = rng::stream(seed, 8);
    let real = spec.sample_batch(N, &mut r)?;
    let synth = gibbs.sample(N, &mut r);
    let estimate = d.mle_gradient(&real, &synth)?;

    // Standard errors from the spread of per-batch estimates.
    let b = N / BATCHES;
    let p = estimate.len();
    let mut sq = vec![0.0; p];
    for k in 0..BATCHES {
        let g = d.mle_gradient(&real.slice_rows(k * b, (k + 1) * b), &synth.slice_rows(k * b, (k + 1) * b))?;
        for ((s, gi), e) in sq.iter_mut().zip(&g).zip(&estimate) {
            *s += (gi - e) * (gi - e);
        }
    }
    let mut worst: f64 = 0.0;
    let mut within = true;
    for ((s, e), o) in sq.iter().zip(&estimate).zip(&oracle) {
        let se = (s / (BATCHES - 1) as f64).sqrt() / (BATCHES as f64).sqrt();
        let dev = (e - o).abs();
        within &= dev <= 3.0 * se + 1e-12;
        if se > 0.0 {
            worst = worst.max(dev / se);
        }
    }
    Ok(Verdict::new(
        within && refinement < 1e-6,
        format!(
            "{p} coordinates, worst deviation {worst:.2} standard errors (need <= 3), 512->1024 bin change {refinement:.1e} (need < 1e-6)"
        ),
    ))
}

// ---- Langevin ---------------------------------------------------------------

/// `D(x) = w·x − (c/2)‖x‖²` in one dimension; Gibbs is `N(w/c, 1/c)`.
pub fn quadratic_descriptor(w: f64, c: f64) -> Descriptor {
    let cfg = MlpConfig::new(1, vec![], 1, Activation::Tanh, 0).with_quadratic_confinement(c);
    let net = Mlp::from_params(cfg, vec![w, 0.0]).unwrap();
    Descriptor::new(net).unwrap()
}

/// Two-sided KS distance between a sample and `N(0, 1)`.
pub fn ks_standard_normal(samples: &[f64]) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub struct Stationarity {
    pub mean: f64,
    pub variance: f64,
    pub ks: f64,
    pub noise_std: f64,
}

/// `chains` independent chains of `steps` steps on `D = −x²/2` from `x0 = 5`,
/// keeping every `thin`-th state of the second half; plus the increment
/// spread of a pure-noise chain.
pub fn langevin_stationarity(chains: usize, steps: usize, thin: usize, seed: u64) -> Result<Stationarity> {
    let eta = 0.01;
    let d = quadratic_descriptor(0.0, 1.0);
    let mut r = rng::stream(seed, 3);
    let mut x = Matrix::from_fn(chains, 1, |_, _| 5.0);
    let mut kept = Vec::new();
    for t in 1..=steps {
        x = langevin::langevin_step(&d, &x, eta, true, None, &mut r)?;
        if t > steps / 2 && t % thin == 0 {
            kept.extend_from_slice(x.as_slice());
        }
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let variance = kept.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let ks = ks_standard_normal(&kept);

    let flat = quadratic_descriptor(0.0, 0.0);
    let cfg = LangevinConfig {
        eta,
        steps: 100_000,
        noise_enabled: true,
        rng_seed: seed,
        grad_clip: None,
    };
    let trace = langevin::run_chain(&flat, &Matrix::zeros(1, 1), &cfg, true)?
        .trace
        .expect("trace requested");
    let inc: Vec<f64> = trace.windows(2).map(|w| w[1].get(0, 0) - w[0].get(0, 0)).collect();
    let m = inc.iter().sum::<f64>() / inc.len() as f64;
    let noise_std = (inc.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (inc.len() - 1) as f64).sqrt();
    Ok(Stationarity {
        mean,
        variance,
        ks,
        noise_std,
    })
}

pub fn stationarity_verdict(s: &Stationarity) -> Verdict {
    let target = (2.0f64 * 0.01).sqrt();
    let noise_rel = (s.noise_std / target - 1.0).abs();
    Verdict::new(
        s.mean.abs() < 0.05 && (s.variance - 1.0).abs() < 0.1 && noise_rel < 0.02,
        format!(
            "mean {:.4} (|.| < 0.05), variance {:.4} (within 10% of 1), KS {:.4}, noise std {:.5} vs {target:.5} ({:.2}% off, need < 2%)",
            s.mean,
            s.variance,
            s.ks,
            s.noise_std,
            100.0 * noise_rel
        ),
    )
}

// ---- schedule exactness -----------------------------------------------------

/// A short run with both stages, evaluation and a few records.
pub fn small_setup(seed: u64) -> RunSetup {
    let mut cfg = RunConfig::flagship();
    cfg.seed = seed;
    cfg.schedule.total_examples = 20_480;
    cfg.schedule.ncoop_frac = 0.1;
    cfg.schedule.eval_every = 2_048;
    cfg.schedule.eval_samples = 500;
    cfg.resolve().unwrap()
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn same_params(a: &TrainerState, b: &TrainerState) -> bool {
    bits(a.descriptor.net.params()) == bits(b.descriptor.net.params())
        && bits(a.generator.net.params()) == bits(b.generator.net.params())
}

pub fn same_records(a: &[RunRecord], b: &[RunRecord]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.consumed == y.consumed
                && x.stage == y.stage
                && x.modes_covered == y.modes_covered
                && bits(&[x.d_loss, x.g_loss, x.hq_fraction, x.energy_distance])
                    == bits(&[y.d_loss, y.g_loss, y.hq_fraction, y.energy_distance])
        })
}

/// `n_coop = 0` through the scheduler against a hand-driven adversarial loop.
pub fn plain_gan_equivalence(seed: u64) -> Result<bool> {
    let mut setup = small_setup(seed);
    setup.train.n_adv += setup.train.n_coop;
    setup.train.n_coop = 0;
    let scheduled = trainer::run(&setup, &mut ())?;

    let cfg = &setup.train;
    let mut s = TrainerState::new(&setup)?;
    while s.consumed < cfg.n_adv {
        let real = setup.dataset.sample_batch(cfg.batch_size, &mut s.data_rng)?;
        s.adv_iteration(cfg, &real)?;
    }
    Ok(same_params(&scheduled.state, &s) && scheduled.records.iter().all(|r| r.stage == Stage::Adversarial))
}

/// The boundary step leaves the parameters exactly where the last
/// cooperative update put them, and starts fresh Adam moments.
pub fn boundary_carry_over(seed: u64) -> Result<bool> {
    let setup = small_setup(seed);
    let cfg = &setup.train;
    let mut s = TrainerState::new(&setup)?;
    while s.consumed + (cfg.batch_size as u64) < cfg.n_coop {
        s.step(cfg, &setup.dataset)?;
    }
    let mut direct = s.clone();
    let real = setup.dataset.sample_batch(cfg.batch_size, &mut direct.data_rng)?;
    direct.coop_iteration(cfg, &real)?;

    let changed = s.step(cfg, &setup.dataset)?;
    let fresh = s.adam_d.m.iter().chain(&s.adam_d.v).chain(&s.adam_g.m).chain(&s.adam_g.v).all(|&v| v == 0.0);
    Ok(changed && s.stage == Stage::Adversarial && same_params(&direct, &s) && fresh)
}

/// Interrupt at `stop` examples, round-trip through the checkpoint bytes,
/// resume, and compare with the uninterrupted run.
pub fn resume_equivalence(seed: u64, stop: u64) -> Result<bool> {
    let setup = small_setup(seed);
    let full = trainer::run(&setup, &mut ())?;

    let mut s = TrainerState::new(&setup)?;
    while s.consumed < stop {
        s.step(&setup.train, &setup.dataset)?;
    }
    let bytes = persistence::encode_checkpoint(&setup, &s)?;
    let restored = persistence::decode_checkpoint(&bytes)?;
    let again = persistence::encode_checkpoint(&restored.setup, &restored.state)?;
    let resumed = trainer::resume(&restored.setup, restored.state, &mut ())?;
    let tail: Vec<RunRecord> = full.records.iter().filter(|r| r.consumed > stop).cloned().collect();
    Ok(bytes == again && same_params(&full.state, &resumed.state) && same_records(&tail, &resumed.records))
}

pub fn schedule_exactness() -> Result<Verdict> {
    let setup = small_setup(11);
    let plain = plain_gan_equivalence(11)?;
    let carry = boundary_carry_over(11)?;
    let mid_coop = resume_equivalence(11, 1_024)?;
    let mid_adv = resume_equivalence(11, setup.train.n_coop + 8_192)?;
    Ok(Verdict::new(
        plain && carry && mid_coop && mid_adv,
        format!(
            "plain-GAN path identical: {plain}; boundary carry-over bitwise: {carry}; resume mid-cooperative: {mid_coop}; resume mid-adversarial: {mid_adv}"
        ),
    ))
}

// ---- chase ------------------------------------------------------------------

pub struct Chase {
    pub mean: f64,
    pub variance: f64,
    pub target_mean: f64,
    pub target_variance: f64,
}

/// Cooperative generator updates against a frozen quadratic descriptor.
pub fn chase(iterations: usize, eta: f64, steps: usize, seed: u64) -> Result<Chase> {
    let (w, c) = (3.0, 2.0);
    let d = quadratic_descriptor(w, c);
    let models = coopinit::ModelConfig::toy(1, seed);
    let mut g = Generator::new(Mlp::new(models.generator)?);
    let mut adam = coopinit::AdamState::new(g.net.param_count(), coopinit::AdamParams::default());
    let lcfg = LangevinConfig {
        eta,
        steps,
        noise_enabled: true,
        rng_seed: 0,
        grad_clip: None,
    };
    let mut r = rng::stream(seed, 4);
    for _ in 0..iterations {
        let z = g.sample_latents(256, &mut r)?;
        let x0 = g.generate(&z)?;
        let revised = langevin::run_chain_with_rng(&d, &x0, &lcfg, false, &mut r)?.samples;
        let (_, grad) = g.teaching_loss_grad(&z, &revised)?;
        adam.step(g.net.params_mut(), &grad, false)?;
    }
    let x = g.sample(20_000, &mut r)?;
    Ok(Chase {
        mean: x.column_means()[0],
        variance: x.column_variances()[0],
        target_mean: w / c,
        target_variance: 1.0 / c,
    })
}

pub fn chase_verdict(c: &Chase) -> Verdict {
    let dm = (c.mean / c.target_mean - 1.0).abs();
    let dv = (c.variance / c.target_variance - 1.0).abs();
    Verdict::new(
        dm < 0.1 && dv < 0.1,
        format!(
            "generator mean {:.4} vs {:.4} ({:.1}% off), variance {:.4} vs {:.4} ({:.1}% off), need both within 10%",
            c.mean,
            c.target_mean,
            100.0 * dm,
            c.variance,
            c.target_variance,
            100.0 * dv
        ),
    )
}

// ---- closed forms -----------------------------------------------------------

pub fn closed_forms() -> Result<Verdict> {
    let zeros = [0.0; 16];
    let (ns, _, _) = adversarial::d_logit_loss(LossKind::Ns, &zeros, &zeros);
    let (hinge, _, _) = adversarial::d_logit_loss(LossKind::Hinge, &zeros, &zeros);

    // D(x) = u·x with ‖u‖ = 1.
    let cfg = MlpConfig::new(2, vec![], 1, Activation::Tanh, 0);
    let (a, b) = (0.6, 0.8);
    let d = Descriptor::new(Mlp::from_params(cfg, vec![a, b, 0.25])?)?;
    let mut r = rng::stream(5, 5);
    let real = super::random_matrix(&mut r, 32, 2, 1.0);
    let fake = super::random_matrix(&mut r, 32, 2, 3.0);
    let alphas: Vec<f64> = (0..32).map(|i| (i as f64 + 0.5) / 32.0).collect();
    let gp = adversarial::gradient_penalty(&d, &real, &fake, &alphas)?.loss;

    let e_ns = (ns - 2.0 * std::f64::consts::LN_2).abs();
    let e_h = (hinge - 2.0).abs();
    Ok(Verdict::new(
        e_ns <= 1e-12 && e_h <= 1e-12 && gp.abs() <= 1e-12,
        format!("ns zero-logit error {e_ns:.1e}, hinge zero-logit error {e_h:.1e}, unit-norm penalty {gp:.1e} (all need <= 1e-12)"),
    ))
}
