use serde::{Deserialize, Serialize};

use super::arch::NetParams;
use super::linalg::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment accumulators and step counter of an Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        AdamState { config, m: vec![T::zero(); len], v: vec![T::zero(); len], t: 0 }
    }

    pub fn for_params(config: AdamConfig, params: &NetParams<T>) -> Self {
        Self::new(config, params.data.len())
    }

    /// One bias-corrected update of `theta`.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} values, got {} parameters and {} gradients",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let c = self.config;
        let t = self.t as f64;
        let step = c.learning_rate / (1.0 - c.beta1.powf(t));
        let v_corr = 1.0 / (1.0 - c.beta2.powf(t));
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let (step, v_corr, eps) = (T::of(step), T::of(v_corr), T::of(c.epsilon));
        for ((p, &g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p -= step * *m / ((*v * v_corr).sqrt() + eps);
        }
        Ok(())
    }
}

pub fn adam_step<T: Real>(params: &mut NetParams<T>, grads: &NetParams<T>, state: &mut AdamState<T>) -> Result<()> {
    if params.shape != grads.shape {
        return Err(Error::Shape("gradient shape differs from parameters".into()));
    }
    state.step(&mut params.data, &grads.data)
}
