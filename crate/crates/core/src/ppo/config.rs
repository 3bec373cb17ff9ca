use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// PPO hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    /// Transitions collected per update phase.
    pub batch_size: usize,
    pub clip_epsilon: f64,
    pub gae_lambda: f64,
    pub entropy_coeff: f64,
    pub sgd_epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub total_steps: u64,
    pub seed: u64,
    pub vf_coeff: f64,
    /// Global gradient-norm clip; 0 disables it.
    pub max_grad_norm: f64,
    /// Environments stepped in lockstep during collection.
    pub num_envs: usize,
    pub hidden: Vec<usize>,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 2000,
            clip_epsilon: 0.3,
            gae_lambda: 1.0,
            entropy_coeff: 0.0,
            sgd_epochs: 30,
            minibatch_size: 128,
            learning_rate: 1e-5,
            total_steps: 200_000,
            seed: 0,
            vf_coeff: 0.5,
            max_grad_norm: 0.5,
            num_envs: 10,
            hidden: vec![256, 256],
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(config_err(format!("gamma must lie in (0, 1] (got {})", self.gamma)));
        }
        if !(self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return Err(config_err(format!("gae_lambda must lie in [0, 1] (got {})", self.gae_lambda)));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(config_err(format!("clip_epsilon must be positive (got {})", self.clip_epsilon)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(config_err(format!("learning_rate must be positive (got {})", self.learning_rate)));
        }
        if !(self.entropy_coeff >= 0.0) || !(self.vf_coeff >= 0.0) || !(self.max_grad_norm >= 0.0) {
            return Err(config_err("entropy_coeff, vf_coeff and max_grad_norm must be non-negative"));
        }
        if self.batch_size == 0 || self.minibatch_size == 0 || self.minibatch_size > self.batch_size {
            return Err(config_err(format!(
                "need 0 < minibatch_size <= batch_size (got {} and {})",
                self.minibatch_size, self.batch_size
            )));
        }
        if self.num_envs == 0 || self.batch_size % self.num_envs != 0 {
            return Err(config_err(format!(
                "batch_size ({}) must be a positive multiple of num_envs ({})",
                self.batch_size, self.num_envs
            )));
        }
        if self.sgd_epochs == 0 {
            return Err(config_err("sgd_epochs must be at least 1"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(config_err("hidden layer sizes must be non-empty and positive"));
        }
        Ok(())
    }

    /// Update phases needed to consume `total_steps`.
    pub fn num_iterations(&self) -> u64 {
        self.total_steps.div_ceil(self.batch_size as u64)
    }
}
