//! The training engine: pairwise similarity logits, symmetric contrastive
//! cross-entropy with exact backpropagation, decoupled-weight-decay Adam, and
//! the multi-rate training schedule with ledger output.

mod adam;
mod loss;
mod train;

pub use adam::AdamW;
pub use loss::{clip_loss, loss_grad, similarity_matrix};
pub use train::{
    batch_backward, batch_forward, train, Batch, EvalRecord, RateRun, TrainingLedger,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
}

/// Optimizer and schedule hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastiveConfig {
    pub batch_size: usize,
    pub learning_rates: Vec<f64>,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub eval_every_steps: usize,
    pub log_temperature_init: f64,
    /// Clamp on exp(log_temperature).
    pub temperature_max: f64,
    pub seed: u64,
    pub usd_per_hour: f64,
    pub kg_co2_per_hour: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        ContrastiveConfig {
            batch_size: 64,
            learning_rates: vec![1e-4, 1e-5, 1e-6],
            adam_betas: (0.9, 0.98),
            adam_eps: 1e-6,
            weight_decay: 0.2,
            epochs: 4,
            eval_every_steps: 500,
            log_temperature_init: (1.0f64 / 0.07).ln(),
            temperature_max: 100.0,
            seed: 17,
            usd_per_hour: 3.06,
            kg_co2_per_hour: 0.075,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::BadConfig("batch_size must be at least 2".into()));
        }
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|&r| r <= 0.0) {
            return Err(TrainError::BadConfig("learning rates must be positive".into()));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0 < b1 && b1 < 1.0 && 0.0 < b2 && b2 < 1.0) {
            return Err(TrainError::BadConfig("adam betas must lie in (0, 1)".into()));
        }
        if self.temperature_max <= 0.0 {
            return Err(TrainError::BadConfig("temperature_max must be positive".into()));
        }
        Ok(())
    }
}
