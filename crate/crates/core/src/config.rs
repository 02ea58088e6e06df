use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyper-parameters for a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Samples concatenated into one critic input.
    pub pac: usize,
    /// Width of the normal part of the latent vector.
    pub latent_dim: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Gradient penalty weight.
    pub gp_lambda: f64,
    pub gumbel_temperature: f64,
    pub critic_steps_per_generator_step: usize,
    /// Largest number of clusters tried during k selection.
    pub k_max: usize,
    /// Per-cluster penalty in the scaled-inertia criterion.
    pub inertia_penalty: f64,
    pub kmeans_max_iter: usize,
    pub generator_dim: usize,
    pub critic_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    pub max_sample_attempts_factor: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 100,
            pac: 10,
            latent_dim: 128,
            learning_rate: 2e-4,
            weight_decay: 1e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            gp_lambda: 10.0,
            gumbel_temperature: 0.2,
            critic_steps_per_generator_step: 1,
            k_max: 10,
            inertia_penalty: 0.01,
            kmeans_max_iter: 300,
            generator_dim: 256,
            critic_dim: 256,
            dropout: 0.5,
            seed: 0,
            max_sample_attempts_factor: 100,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.pac == 0 || self.batch_size == 0 || !self.batch_size.is_multiple_of(self.pac) {
            return fail(format!(
                "batch_size ({}) must be a positive multiple of pac ({})",
                self.batch_size, self.pac
            ));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("gumbel_temperature", self.gumbel_temperature),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be > 0, got {v}"));
            }
        }
        for (name, v) in [
            ("weight_decay", self.weight_decay),
            ("gp_lambda", self.gp_lambda),
            ("inertia_penalty", self.inertia_penalty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return fail("Adam betas must lie in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.latent_dim == 0 || self.generator_dim == 0 || self.critic_dim == 0 {
            return fail("layer widths must be positive".into());
        }
        if self.k_max == 0 || self.kmeans_max_iter == 0 {
            return fail("k_max and kmeans_max_iter must be positive".into());
        }
        if self.critic_steps_per_generator_step == 0 || self.max_sample_attempts_factor == 0 {
            return fail("critic steps and sample attempts factor must be positive".into());
        }
        Ok(())
    }
}
