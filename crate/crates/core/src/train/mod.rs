//! Optimizer, metrics and the seeded mini-batch training loop.

mod adam;
mod metrics;
mod trainer;

pub use crate::nn::rmse_loss;
pub use adam::{adam_step, AdamConfig, AdamState};
pub use metrics::{argmax_rows, error_rate, r_squared};
pub use trainer::{
    evaluate, train, train_with, write_jsonl, EpochRecord, EvalMetrics, History, TrainConfig,
};
