//! Optimizer schedule: step decay with a floor.

use serde::{Deserialize, Serialize};

/// Epochs between learning-rate drops.
pub const LR_DECAY_EPOCHS: usize = 4;
/// Each drop divides the learning rate by this factor.
pub const LR_DECAY_FACTOR: f64 = 10.0;

/// Training-loop hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_floor: f64,
    /// Global-norm gradient clip threshold.
    pub grad_clip: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_init: 0.001,
            lr_floor: 0.0001,
            grad_clip: 0.3,
            max_epochs: 12,
            batch_size: 16,
            seed: 13,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lr_init <= 0.0 || self.lr_floor <= 0.0 {
            return Err("learning rates must be positive".to_string());
        }
        if self.lr_floor > self.lr_init {
            return Err(format!(
                "lr floor {} exceeds initial rate {}",
                self.lr_floor, self.lr_init
            ));
        }
        if self.grad_clip <= 0.0 {
            return Err("gradient clip threshold must be positive".to_string());
        }
        if self.batch_size == 0 {
            return Err("batch size must be at least 1".to_string());
        }
        Ok(())
    }
}

/// `lr(e) = max(lr_init / 10^⌊e/4⌋, lr_floor)`.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> f64 {
    let drops = (epoch / LR_DECAY_EPOCHS) as i32;
    (config.lr_init / LR_DECAY_FACTOR.powi(drops)).max(config.lr_floor)
}
