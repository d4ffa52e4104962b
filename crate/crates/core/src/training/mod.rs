//! Objectives, the training loop and evaluation metrics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{AdamConfig, NetShape};

pub mod eval;
pub mod export;
pub mod objectives;
mod train;

pub use eval::{
    deviations, evaluate, robustness_report, Deviation, EvalReport, Model, ModelMeta, Network, Predictor,
    RobustnessReport, RobustnessRow, SplitName,
};
pub use objectives::{
    fit_parameters, grad_labelled, loss_grad_unlabelled, loss_labelled, loss_unlabelled, relative_deviation,
    reproduce_acceleration,
};
pub use train::{train, NoObserver, TrainObserver, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// L1 distance to the true parameters.
    Labelled,
    /// Squared residual of the reconstructed seat acceleration.
    Unlabelled,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Labelled => "labelled",
            Objective::Unlabelled => "unlabelled",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "labelled" | "labeled" | "l" => Ok(Objective::Labelled),
            "unlabelled" | "unlabeled" | "u" => Ok(Objective::Unlabelled),
            other => Err(Error::invalid(format!("unknown objective {other:?}"))),
        }
    }
}

/// Arithmetic precision of the network during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(Error::invalid(format!("unknown precision {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Evaluate every this many steps; 0 disables periodic evaluation.
    pub eval_every: u64,
    pub seed: u64,
    /// Seed of the evaluation windows and noise.
    pub eval_seed: u64,
    /// Noise level of the noisy evaluation; 0 skips it.
    pub noise_sigma_eval: f64,
    /// Noise added to training inputs (ablation; off by default).
    pub noise_sigma_train: f64,
    /// Divide each input channel by its training-set RMS.
    pub normalize_inputs: bool,
    pub precision: Precision,
    pub shape: NetShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            objective: Objective::Labelled,
            steps: 500_000,
            batch_size: 100,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            eval_every: 100_000,
            seed: 0,
            eval_seed: 0,
            noise_sigma_eval: 0.01,
            noise_sigma_train: 0.0,
            normalize_inputs: false,
            precision: Precision::F32,
            shape: NetShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        for (name, s) in [("noise_sigma_eval", self.noise_sigma_eval), ("noise_sigma_train", self.noise_sigma_train)] {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {s}")));
            }
        }
        self.shape.validate()?;
        if self.shape.in_channels != 2 || self.shape.outputs != 2 {
            return Err(Error::Shape(format!(
                "network must map two-channel windows to 2 outputs, got {}x{} -> {}",
                self.shape.input_len,
                self.shape.in_channels,
                self.shape.outputs
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}
