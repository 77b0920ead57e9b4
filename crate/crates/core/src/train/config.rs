//! Training hyperparameters, serialized as the `[train]` table:
//!
//! ```toml
//! # learning_rate = 1e-4    # omitted: 1e-4, or 5e-4 for vln-resnet
//! rho = 0.9
//! epsilon = 1e-8
//! horizon = 5               # future frames in the training loss
//! epochs = 5
//! batch_size = 16
//! train_size = 10000        # training sequences per epoch
//! val_size = 1000           # validation sequences per epoch (0 skips)
//! test_size = 1000          # test sequences used by `eval`
//! eval_batch_size = 25
//! seed = 0                  # dataset streams and split
//! init_seed = 0             # parameter initialization
//! fixed_train_set = false   # reuse epoch 0's sequences every epoch
//! checkpoint_every = 1      # epochs between checkpoints
//! ```

use serde::{Deserialize, Serialize};

use super::eval::EVAL_HORIZON;
use super::rollout::MAX_HORIZON;
use crate::error::{Error, Result};
use crate::model::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    pub rho: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub eval_batch_size: usize,
    pub seed: u64,
    pub init_seed: u64,
    pub fixed_train_set: bool,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: None,
            rho: 0.9,
            epsilon: 1e-8,
            horizon: 5,
            epochs: 5,
            batch_size: 16,
            train_size: 10_000,
            val_size: 1_000,
            test_size: 1_000,
            eval_batch_size: 25,
            seed: 0,
            init_seed: 0,
            fixed_train_set: false,
            checkpoint_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self, variant: Variant) -> f64 {
        self.learning_rate.unwrap_or_else(|| variant.default_learning_rate())
    }

    /// Copy with the learning rate made explicit.
    pub fn resolved(&self, variant: Variant) -> Self {
        TrainConfig {
            learning_rate: Some(self.learning_rate(variant)),
            ..self.clone()
        }
    }

    pub fn eval_horizon(&self) -> usize {
        EVAL_HORIZON
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.into()));
        if !(1..=MAX_HORIZON).contains(&self.horizon) {
            return err("train.horizon must be in 1..=10");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return err("train.rho must be in (0, 1)");
        }
        if self.epsilon < 0.0 || self.learning_rate.is_some_and(|lr| !(lr > 0.0 && lr.is_finite())) {
            return err("train.epsilon must be >= 0 and train.learning_rate > 0");
        }
        if self.batch_size == 0 || self.eval_batch_size == 0 || self.train_size == 0 {
            return err("train.batch_size, train.eval_batch_size and train.train_size must be positive");
        }
        if self.checkpoint_every == 0 {
            return err("train.checkpoint_every must be positive");
        }
        Ok(())
    }
}
