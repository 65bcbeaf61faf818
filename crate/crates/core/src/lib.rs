//! Cooperative initialization for GANs on toy Gaussian mixtures.
//!
//! A descriptor `D` (an energy-based model with density `∝ exp D(x)`) and a
//! generator `G` are first trained cooperatively: `G` proposes samples,
//! Langevin dynamics on `D` revises them, `D` follows the likelihood
//! gradient and `G` regresses onto the revisions. The same two networks then
//! continue as an ordinary discriminator/generator pair.
//!
//! Everything runs on small dense MLPs with hand-written backprop in `f64`.

pub mod adversarial;
pub mod cli;
pub mod config;
pub mod data;
pub mod ebm;
pub mod error;
pub mod generator;
pub mod langevin;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod persistence;
pub mod plot;
pub mod rng;
pub mod trainer;

pub use adversarial::{AdversarialConfig, LossKind};
pub use data::{DatasetKind, DatasetSpec};
pub use ebm::{Descriptor, GibbsGrid, GridSpec};
pub use error::{Error, Result};
pub use generator::Generator;
pub use langevin::LangevinConfig;
pub use matrix::Matrix;
pub use nn::{Activation, AdamParams, AdamState, Mlp, MlpConfig};
pub use trainer::{ModelConfig, RunRecord, RunSetup, Stage, TrainConfig, TrainerState};
