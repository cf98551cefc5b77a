use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// PPO hyperparameters shared by both teams' learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    /// World steps collected per iteration, summed over workers.
    pub steps_per_iteration: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub value_weight: f64,
    pub entropy_weight: f64,
    pub max_grad_norm: f64,
    /// Decay the learning rate linearly to zero over `train.iterations`.
    pub anneal_learning_rate: bool,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            steps_per_iteration: 4096,
            epochs: 4,
            minibatch_size: 256,
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            value_weight: 0.5,
            entropy_weight: 0.01,
            max_grad_norm: 0.5,
            anneal_learning_rate: false,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("ppo.steps_per_iteration", self.steps_per_iteration),
            ("ppo.epochs", self.epochs),
            ("ppo.minibatch_size", self.minibatch_size),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::config("ppo.clip", format!("must lie in (0, 1), got {}", self.clip)));
        }
        for (field, v) in [("ppo.gamma", self.gamma), ("ppo.lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("must lie in [0, 1], got {v}")));
            }
        }
        for (field, v) in [("ppo.value_weight", self.value_weight), ("ppo.entropy_weight", self.entropy_weight)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, format!("must be a finite non-negative number, got {v}")));
            }
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm > 0.0) {
            return Err(Error::config("ppo.max_grad_norm", "must be positive"));
        }
        let a = &self.adam;
        if !(a.learning_rate.is_finite() && a.learning_rate > 0.0) {
            return Err(Error::config("ppo.adam.learning_rate", "must be positive"));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::config("ppo.adam", "betas must lie in [0, 1)"));
        }
        if !(a.epsilon > 0.0) {
            return Err(Error::config("ppo.adam.epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// The learning rate in effect on `iteration` of a run lasting `iterations`.
pub fn scheduled_learning_rate(config: &PpoConfig, iteration: usize, iterations: usize) -> f64 {
    let lr = config.adam.learning_rate;
    if !config.anneal_learning_rate || iterations == 0 {
        return lr;
    }
    lr * (1.0 - iteration as f64 / iterations as f64).max(0.0)
}
