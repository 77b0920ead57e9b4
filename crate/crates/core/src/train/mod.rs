//! Optimizer, windowed training and evaluation, metrics and run management.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod optim;
pub mod rollout;
pub mod run;
pub mod window;

pub use config::TrainConfig;
pub use eval::{evaluate_batch, evaluate_sequence, evaluate_stream, evaluate_testset, EvalReport, Predictor};
pub use metrics::MetricsRecord;
pub use optim::{rmsprop_update, RmsProp};
pub use rollout::{rollout, train_batch, BatchLoss};
pub use run::{train_run, RunConfig, RunOptions};
pub use window::{frame_batch, WindowState};
