//! TOML run configuration.
//!
//! ```toml
//! format_version = 1
//! seed = 0
//!
//! [dataset]
//! kind = "gaussian_ring"   # or gaussian_grid, gaussian_line1d
//! k = 8
//! radius = 2.0
//! sigma = 0.05
//!
//! [schedule]
//! batch_size = 256
//! total_examples = 2000000
//! ncoop_frac = 0.03        # share of total_examples spent cooperatively
//! eval_every = 100000
//! eval_samples = 2000
//! checkpoint_every = 0     # 0: only the final checkpoint
//! carry_adam = false
//!
//! [cooperative]
//! lr_d = 1e-3
//! lr_g = 1e-3
//!
//! [langevin]
//! eta = 1.0
//! steps = 10
//! noise = true
//! # grad_clip = 100.0
//!
//! [adversarial]
//! loss = "ns"              # ns, hinge, was, was_gp
//! gamma = 0.0
//! lambda_gp = 10.0
//! lr_d = 1e-3
//! lr_g = 1e-3
//!
//! [optimizer]
//! beta1 = 0.5
//! beta2 = 0.999
//! eps = 1e-8
//!
//! [descriptor]
//! hidden = [64, 64]
//! activation = { kind = "leaky_relu", slope = 0.2 }
//!
//! [generator]
//! latent_dim = 16
//! hidden = [64, 64]
//! activation = { kind = "tanh" }
//! ```
//!
//! Every section and field is optional; missing ones take the values above.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversarial::{AdversarialConfig, LossKind};
use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::langevin::LangevinConfig;
use crate::nn::{Activation, AdamParams, MlpConfig};
use crate::rng;
use crate::trainer::{ModelConfig, RunSetup, TrainConfig};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub schedule: ScheduleSection,
    pub cooperative: CooperativeSection,
    pub langevin: LangevinSection,
    pub adversarial: AdversarialSection,
    pub optimizer: OptimizerSection,
    pub descriptor: NetSection,
    pub generator: GeneratorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub batch_size: usize,
    pub total_examples: u64,
    pub ncoop_frac: f64,
    pub eval_every: u64,
    pub eval_samples: usize,
    pub checkpoint_every: u64,
    pub carry_adam: bool,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            batch_size: 256,
            total_examples: 2_000_000,
            ncoop_frac: 0.03,
            eval_every: 100_000,
            eval_samples: 2_000,
            checkpoint_every: 0,
            carry_adam: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CooperativeSection {
    pub lr_d: f64,
    pub lr_g: f64,
}

impl Default for CooperativeSection {
    fn default() -> Self {
        Self { lr_d: 1e-3, lr_g: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangevinSection {
    pub eta: f64,
    pub steps: usize,
    pub noise: bool,
    pub grad_clip: Option<f64>,
}

impl Default for LangevinSection {
    fn default() -> Self {
        Self {
            eta: 1.0,
            steps: 10,
            noise: true,
            grad_clip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarialSection {
    pub loss: LossKind,
    pub gamma: f64,
    pub lambda_gp: f64,
    pub lr_d: f64,
    pub lr_g: f64,
}

impl Default for AdversarialSection {
    fn default() -> Self {
        let d = AdversarialConfig::default();
        Self {
            loss: d.loss,
            gamma: d.gamma,
            lambda_gp: d.lambda_gp,
            lr_d: d.lr_d,
            lr_g: d.lr_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = AdamParams::default();
        Self {
            beta1: d.beta1,
            beta2: d.beta2,
            eps: d.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            activation: Activation::LeakyRelu { slope: 0.2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 0,
            dataset: DatasetSpec::canonical_ring(),
            schedule: ScheduleSection::default(),
            cooperative: CooperativeSection::default(),
            langevin: LangevinSection::default(),
            adversarial: AdversarialSection::default(),
            optimizer: OptimizerSection::default(),
            descriptor: NetSection::default(),
            generator: GeneratorSection::default(),
        }
    }
}

impl RunConfig {
    /// 8-mode ring, NS loss, 2M examples with 3% spent cooperatively.
    pub fn flagship() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_owned();
            Error::config(field, e.to_string().trim_end())
        })?;
        if cfg.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!(
                    "version {} is not supported (expected {CONFIG_FORMAT_VERSION})",
                    cfg.format_version
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// `(n_coop, n_adv)` in examples.
    pub fn split(&self) -> (u64, u64) {
        let total = self.schedule.total_examples;
        let n_coop = ((total as f64) * self.schedule.ncoop_frac).round() as u64;
        let n_coop = n_coop.min(total);
        (n_coop, total - n_coop)
    }

    pub fn resolve(&self) -> Result<RunSetup> {
        let s = &self.schedule;
        if !(0.0..=1.0).contains(&s.ncoop_frac) {
            return Err(Error::config(
                "schedule.ncoop_frac",
                format!("{} is outside [0, 1]", s.ncoop_frac),
            ));
        }
        let (n_coop, n_adv) = self.split();
        let dim = self.dataset.dim();
        let train = TrainConfig {
            batch_size: s.batch_size,
            n_coop,
            n_adv,
            langevin: LangevinConfig {
                eta: self.langevin.eta,
                steps: self.langevin.steps,
                noise_enabled: self.langevin.noise,
                rng_seed: self.seed,
                grad_clip: self.langevin.grad_clip,
            },
            adv: AdversarialConfig {
                loss: self.adversarial.loss,
                gamma: self.adversarial.gamma,
                lambda_gp: self.adversarial.lambda_gp,
                lr_d: self.adversarial.lr_d,
                lr_g: self.adversarial.lr_g,
            },
            coop_lr_d: self.cooperative.lr_d,
            coop_lr_g: self.cooperative.lr_g,
            adam: AdamParams {
                lr: self.cooperative.lr_d,
                beta1: self.optimizer.beta1,
                beta2: self.optimizer.beta2,
                eps: self.optimizer.eps,
            },
            carry_adam: s.carry_adam,
            seed: self.seed,
            eval_every: s.eval_every,
            eval_samples: s.eval_samples,
            record_wall_ms: false,
        };
        let models = ModelConfig {
            descriptor: MlpConfig::new(
                dim,
                self.descriptor.hidden.clone(),
                1,
                self.descriptor.activation,
                rng::mix(self.seed, 1),
            ),
            generator: MlpConfig::new(
                self.generator.latent_dim,
                self.generator.hidden.clone(),
                dim,
                self.generator.activation,
                rng::mix(self.seed, 2),
            ),
        };
        let setup = RunSetup {
            train,
            models,
            dataset: self.dataset.clone(),
        };
        setup.validate()?;
        Ok(setup)
    }
}
