//! PPO with GAE over the single-agent environment.

mod gae;
mod loss;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::net::optim::OptimizerKind;

pub use gae::{gae_advantages, normalize};
pub use loss::{ppo_loss, LossOutput, RolloutBatch};
pub use trainer::{prepare_batch, train_iteration, update, Collected, Collector, EnvSource, Learner, UpdateStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub train_batch: usize,
    pub minibatch: usize,
    pub epochs_per_batch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub iteration_steps: usize,
    pub optimizer: OptimizerKind,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.3,
            lambda: 1.0,
            clip_ratio: 0.2,
            learning_rate: 1e-5,
            train_batch: 1000,
            minibatch: 100,
            epochs_per_batch: 4,
            entropy_coef: 0.0,
            value_coef: 0.5,
            iteration_steps: 50_000,
            optimizer: OptimizerKind::Sgd,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        for (name, v) in [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("clip_ratio", self.clip_ratio),
            ("learning_rate", self.learning_rate),
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
        ] {
            if !v.is_finite() {
                return bad(&format!("{name} must be finite"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad("gamma and lambda must lie in [0, 1]");
        }
        if self.clip_ratio <= 0.0 {
            return bad("clip_ratio must be positive");
        }
        if self.learning_rate < 0.0 {
            return bad("learning_rate must be non-negative");
        }
        if self.minibatch == 0 || self.train_batch == 0 || self.train_batch % self.minibatch != 0 {
            return bad("minibatch must divide train_batch");
        }
        if self.epochs_per_batch == 0 {
            return bad("epochs_per_batch must be at least 1");
        }
        if self.iteration_steps < self.train_batch {
            return bad("iteration_steps must be at least train_batch");
        }
        Ok(())
    }

    /// Train batches per iteration.
    pub fn batches_per_iteration(&self) -> usize {
        self.iteration_steps / self.train_batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PpoConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batches_per_iteration(), 50);
    }

    #[test]
    fn minibatch_must_divide() {
        let c = PpoConfig {
            minibatch: 300,
            ..PpoConfig::default()
        };
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
        let c = PpoConfig {
            gamma: f64::NAN,
            ..PpoConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
