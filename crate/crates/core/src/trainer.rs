//! Two-stage training: cooperative (MLE) initialization, then adversarial
//! finalization with the same parameters.
//!
//! Every iteration consumes one real batch of `n` examples. The cooperative
//! stage runs for `⌈n_coop/n⌉` iterations, the adversarial stage for
//! `⌈n_adv/n⌉`. Losses of the two stages are never combined; which one is
//! active is decided solely by [`Stage`].

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversarial::{self, AdversarialConfig};
use crate::data::DatasetSpec;
use crate::ebm::Descriptor;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::langevin::{self, LangevinConfig};
use crate::matrix::Matrix;
use crate::metrics;
use crate::nn::{Activation, AdamParams, AdamState, Mlp, MlpConfig};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Cooperative,
    Adversarial,
    Done,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cooperative => "cooperative",
            Stage::Adversarial => "adversarial",
            Stage::Done => "done",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Stage::Cooperative => 0,
            Stage::Adversarial => 1,
            Stage::Done => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Stage::Cooperative),
            1 => Ok(Stage::Adversarial),
            2 => Ok(Stage::Done),
            other => Err(Error::Format(format!("unknown stage code {other}"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Stage::Cooperative, Stage::Adversarial, Stage::Done]
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown stage `{s}`")))
    }
}

/// Architectures of the two networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub descriptor: MlpConfig,
    pub generator: MlpConfig,
}

impl ModelConfig {
    /// Descriptor `dim→64→64→1` (leaky relu 0.2) and generator
    /// `16→64→64→dim` (tanh), seeded from `seed`.
    pub fn toy(dim: usize, seed: u64) -> Self {
        Self {
            descriptor: MlpConfig::new(
                dim,
                vec![64, 64],
                1,
                Activation::LeakyRelu { slope: 0.2 },
                rng::mix(seed, 1),
            ),
            generator: MlpConfig::new(16, vec![64, 64], dim, Activation::Tanh, rng::mix(seed, 2)),
        }
    }

    pub fn validate(&self, data_dim: usize) -> Result<()> {
        self.descriptor.validate()?;
        self.generator.validate()?;
        if self.descriptor.output_dim != 1 {
            return Err(Error::config("descriptor.output_dim", "must be 1"));
        }
        if self.descriptor.input_dim != data_dim {
            return Err(Error::config(
                "descriptor.input_dim",
                format!("must equal the data dimension {data_dim}"),
            ));
        }
        if self.generator.output_dim != data_dim {
            return Err(Error::config(
                "generator.output_dim",
                format!("must equal the data dimension {data_dim}"),
            ));
        }
        if self.generator.quadratic_confinement != 0.0 {
            return Err(Error::config(
                "generator.quadratic_confinement",
                "only descriptors carry a confinement term",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Examples consumed by the cooperative stage.
    pub n_coop: u64,
    /// Examples consumed by the adversarial stage.
    pub n_adv: u64,
    pub langevin: LangevinConfig,
    pub adv: AdversarialConfig,
    pub coop_lr_d: f64,
    pub coop_lr_g: f64,
    /// Betas and epsilon shared by every Adam state; rates come from the stage.
    pub adam: AdamParams,
    /// Keep Adam moments across the stage boundary instead of resetting them.
    pub carry_adam: bool,
    pub seed: u64,
    /// Examples between metric rows.
    pub eval_every: u64,
    pub eval_samples: usize,
    /// Fill `RunRecord::wall_ms`; off keeps record streams bitwise reproducible.
    #[serde(default)]
    pub record_wall_ms: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            n_coop: 60_000,
            n_adv: 1_940_000,
            langevin: LangevinConfig::default(),
            adv: AdversarialConfig::default(),
            coop_lr_d: 1e-3,
            coop_lr_g: 1e-3,
            adam: AdamParams::default(),
            carry_adam: false,
            seed: 0,
            eval_every: 100_000,
            eval_samples: 2_000,
            record_wall_ms: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.eval_samples == 0 {
            return Err(Error::config("eval_samples", "must be at least 1"));
        }
        for (name, lr) in [("coop_lr_d", self.coop_lr_d), ("coop_lr_g", self.coop_lr_g)] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::config(name, format!("{lr} is not a valid rate")));
            }
        }
        self.adam.validate()?;
        self.langevin.validate()?;
        self.adv.validate()
    }

    pub fn coop_iterations(&self) -> u64 {
        self.n_coop.div_ceil(self.batch_size as u64)
    }

    pub fn adv_iterations(&self) -> u64 {
        self.n_adv.div_ceil(self.batch_size as u64)
    }

    pub fn total_iterations(&self) -> u64 {
        self.coop_iterations() + self.adv_iterations()
    }

    fn adam_for(&self, stage: Stage, param_count: usize, descriptor: bool) -> AdamState {
        let lr = match (stage, descriptor) {
            (Stage::Cooperative, true) => self.coop_lr_d,
            (Stage::Cooperative, false) => self.coop_lr_g,
            (_, true) => self.adv.lr_d,
            (_, false) => self.adv.lr_g,
        };
        AdamState::new(param_count, self.adam.with_lr(lr))
    }
}

/// Everything needed to start (or restart) a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetup {
    pub train: TrainConfig,
    pub models: ModelConfig,
    pub dataset: DatasetSpec,
}

impl RunSetup {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.models.validate(self.dataset.dim())?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterationLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainerState {
    pub descriptor: Descriptor,
    pub generator: Generator,
    pub adam_d: AdamState,
    pub adam_g: AdamState,
    /// Examples consumed so far.
    pub consumed: u64,
    /// Examples consumed by the cooperative stage, final once it ends.
    pub coop_consumed: u64,
    pub stage: Stage,
    /// Latents, Langevin noise and penalty interpolation.
    pub rng: Rng,
    /// Real mini-batches.
    pub data_rng: Rng,
    pub last: IterationLosses,
}

impl TrainerState {
    pub fn new(setup: &RunSetup) -> Result<Self> {
        setup.validate()?;
        let cfg = &setup.train;
        let descriptor = Descriptor::new(Mlp::new(setup.models.descriptor.clone())?)?;
        let generator = Generator::new(Mlp::new(setup.models.generator.clone())?);
        let stage = if cfg.n_coop > 0 {
            Stage::Cooperative
        } else if cfg.n_adv > 0 {
            Stage::Adversarial
        } else {
            Stage::Done
        };
        Ok(Self {
            adam_d: cfg.adam_for(stage, descriptor.net.param_count(), true),
            adam_g: cfg.adam_for(stage, generator.net.param_count(), false),
            descriptor,
            generator,
            consumed: 0,
            coop_consumed: 0,
            stage,
            rng: rng::stream(cfg.seed, 0),
            data_rng: rng::stream(rng::mix(cfg.seed, setup.dataset.seed), 1),
            last: IterationLosses::default(),
        })
    }

    /// One cooperative iteration: generate, revise by Langevin, ascend the
    /// likelihood gradient in `θ`, regress `G` onto the revised samples.
    pub fn coop_iteration(&mut self, cfg: &TrainConfig, real: &Matrix) -> Result<IterationLosses> {
        if self.stage != Stage::Cooperative {
            return Err(Error::Contract(format!(
                "coop_iteration called in the {} stage",
                self.stage
            )));
        }
        let n = real.rows();
        let z = self.generator.sample_latents(n, &mut self.rng)?;
        let initial = self.generator.generate(&z)?;
        let revised =
            langevin::run_chain_with_rng(&self.descriptor, &initial, &cfg.langevin, false, &mut self.rng)?
                .samples;

        let grad_d = self.descriptor.mle_gradient(real, &revised)?;
        let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        let d_loss = mean(self.descriptor.score(&revised)?) - mean(self.descriptor.score(real)?);
        let (g_loss, grad_g) = self.generator.teaching_loss_grad(&z, &revised)?;

        self.adam_d
            .step(self.descriptor.net.params_mut(), &grad_d, true)?;
        self.adam_g
            .step(self.generator.net.params_mut(), &grad_g, false)?;
        self.consumed += n as u64;
        self.last = IterationLosses { d_loss, g_loss };
        Ok(self.last)
    }

    /// One adversarial iteration: a discriminator step, then a generator
    /// step, each on fresh latents.
    pub fn adv_iteration(&mut self, cfg: &TrainConfig, real: &Matrix) -> Result<IterationLosses> {
        if self.stage != Stage::Adversarial {
            return Err(Error::Contract(format!(
                "adv_iteration called in the {} stage",
                self.stage
            )));
        }
        let n = real.rows();
        let z = self.generator.sample_latents(n, &mut self.rng)?;
        let fake = self.generator.generate(&z)?;
        let d = adversarial::d_loss(&cfg.adv, &self.descriptor, real, &fake, &mut self.rng)?;
        self.adam_d
            .step(self.descriptor.net.params_mut(), &d.grad, false)?;

        let z = self.generator.sample_latents(n, &mut self.rng)?;
        let g = adversarial::g_loss(&cfg.adv, &self.descriptor, &self.generator, &z)?;
        self.adam_g
            .step(self.generator.net.params_mut(), &g.grad, false)?;
        self.consumed += n as u64;
        self.last = IterationLosses {
            d_loss: d.loss,
            g_loss: g.loss,
        };
        Ok(self.last)
    }

    /// Draws a real batch, runs the iteration for the current stage and
    /// advances the stage when its budget is spent. Returns whether the
    /// stage changed.
    pub fn step(&mut self, cfg: &TrainConfig, dataset: &DatasetSpec) -> Result<bool> {
        let stage = self.stage;
        let real = dataset.sample_batch(cfg.batch_size, &mut self.data_rng)?;
        let outcome = match stage {
            Stage::Cooperative => self.coop_iteration(cfg, &real),
            Stage::Adversarial => self.adv_iteration(cfg, &real),
            Stage::Done => return Err(Error::Contract("training already finished".into())),
        };
        match outcome {
            Ok(_) => self.check_finite()?,
            Err(Error::Numeric { row, col, context }) => {
                return Err(self.training_error(format!(
                    "{context} (row {row}, column {col})"
                )))
            }
            Err(e) => return Err(e),
        }
        match stage {
            Stage::Cooperative if self.consumed >= cfg.n_coop => {
                self.coop_consumed = self.consumed;
                self.stage = if cfg.n_adv > 0 {
                    Stage::Adversarial
                } else {
                    Stage::Done
                };
                if cfg.carry_adam {
                    self.adam_d.hyper.lr = cfg.adv.lr_d;
                    self.adam_g.hyper.lr = cfg.adv.lr_g;
                } else {
                    self.adam_d = cfg.adam_for(Stage::Adversarial, self.adam_d.m.len(), true);
                    self.adam_g = cfg.adam_for(Stage::Adversarial, self.adam_g.m.len(), false);
                }
            }
            Stage::Adversarial if self.consumed - self.coop_consumed >= cfg.n_adv => {
                self.stage = Stage::Done;
            }
            _ => {}
        }
        Ok(self.stage != stage)
    }

    fn check_finite(&self) -> Result<()> {
        if !(self.last.d_loss.is_finite() && self.last.g_loss.is_finite()) {
            return Err(self.training_error("non-finite loss".into()));
        }
        let nets = [
            ("descriptor", self.descriptor.net.params()),
            ("generator", self.generator.net.params()),
        ];
        for (name, params) in nets {
            if let Some(k) = params.iter().position(|v| !v.is_finite()) {
                return Err(self.training_error(format!("non-finite {name} parameter at index {k}")));
            }
        }
        Ok(())
    }

    fn training_error(&self, detail: String) -> Error {
        Error::Training {
            consumed: self.consumed,
            stage: self.stage.to_string(),
            detail: format!(
                "{detail}; last losses d={:.6e} g={:.6e}",
                self.last.d_loss, self.last.g_loss
            ),
        }
    }
}

/// One metric row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub consumed: u64,
    pub stage: Stage,
    pub d_loss: f64,
    pub g_loss: f64,
    pub modes_covered: usize,
    pub hq_fraction: f64,
    pub energy_distance: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub coverage: metrics::CoverageReport,
    pub energy_distance: metrics::EnergyDistanceReport,
}

/// Metrics of the current generator against fresh real samples. The draws
/// come from a stream keyed on `(seed, consumed)`, so evaluating never
/// perturbs training.
pub fn evaluate(state: &TrainerState, cfg: &TrainConfig, dataset: &DatasetSpec) -> Result<Evaluation> {
    let mut rng = rng::stream(rng::mix(cfg.seed, state.consumed), 2);
    let fake = state.generator.sample(cfg.eval_samples, &mut rng)?;
    let real = dataset.sample_batch(cfg.eval_samples, &mut rng)?;
    let coverage = metrics::mode_coverage(
        &fake,
        &dataset.mode_centers(),
        dataset.sigma(),
        metrics::DEFAULT_THRESHOLD_K,
        None,
    )?;
    let energy_distance = metrics::energy_distance(&fake, &real)?;
    Ok(Evaluation {
        coverage,
        energy_distance,
    })
}

/// Hooks into a running training loop. Errors abort the run.
pub trait RunObserver {
    fn on_iteration(&mut self, _state: &TrainerState, _prev_consumed: u64) -> Result<()> {
        Ok(())
    }

    /// Called once, right after the cooperative stage ends.
    fn on_transition(&mut self, _state: &TrainerState) -> Result<()> {
        Ok(())
    }

    fn on_record(&mut self, _state: &TrainerState, _record: &RunRecord) -> Result<()> {
        Ok(())
    }
}

impl RunObserver for () {}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: TrainerState,
    pub records: Vec<RunRecord>,
}

/// Trains from scratch until both stage budgets are spent.
pub fn run(setup: &RunSetup, observer: &mut dyn RunObserver) -> Result<RunOutcome> {
    let state = TrainerState::new(setup)?;
    resume(setup, state, observer)
}

/// Continues training `state` to the end of the schedule.
pub fn resume(setup: &RunSetup, mut state: TrainerState, observer: &mut dyn RunObserver) -> Result<RunOutcome> {
    setup.validate()?;
    let cfg = &setup.train;
    let started = Instant::now();
    let mut records = Vec::new();
    while state.stage != Stage::Done {
        let prev = state.consumed;
        let stage = state.stage;
        state.step(cfg, &setup.dataset)?;
        observer.on_iteration(&state, prev)?;
        if stage == Stage::Cooperative && state.stage != Stage::Cooperative {
            observer.on_transition(&state)?;
        }
        if state.consumed / cfg.eval_every > prev / cfg.eval_every || state.stage == Stage::Done {
            let eval = evaluate(&state, cfg, &setup.dataset)?;
            let record = RunRecord {
                consumed: state.consumed,
                stage,
                d_loss: state.last.d_loss,
                g_loss: state.last.g_loss,
                modes_covered: eval.coverage.modes_covered,
                hq_fraction: eval.coverage.high_quality_fraction,
                energy_distance: eval.energy_distance.value,
                wall_ms: if cfg.record_wall_ms {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            };
            observer.on_record(&state, &record)?;
            records.push(record);
        }
    }
    Ok(RunOutcome { state, records })
}
