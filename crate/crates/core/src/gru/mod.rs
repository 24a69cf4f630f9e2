//! Bidirectional GRU sequence-to-sequence forecaster: encoder, repeated state, decoder and a
//! linear per-timestep head, trained with hand-written backpropagation through time.

mod checkpoint;
mod model;
mod optim;
mod params;
mod train;

use thiserror::Error;

pub use checkpoint::{
    checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint, Checkpoint,
    CHECKPOINT_VERSION,
};
pub use model::{
    backward, forward, gru_cell_step, loss_mse, metric_mae, mse_and_gradients, mse_gradient,
    predict, ForwardCache,
};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{
    init_params, param_count, param_count_for, GruDirectionParams, GruSeq2SeqParams, ParamCount,
};
pub use train::{
    cell_seed, evaluate, fit, grid_search, predict_all, predict_horizon, stack_windows, train,
    EpochMetrics, GridCell, GridResult, GridSpec, TrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum GruError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("parameters contain non-finite values")]
    NonFinite,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("DIVERGED: loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty split: {0}")]
    EmptySplit(String),
    #[error("grid search needs at least one cell")]
    EmptyGrid,
    #[error("forward cache does not belong to these parameters")]
    StaleCache,
    #[error("scaler has {got} features, model expects {expected}")]
    ScalerMismatch { expected: usize, got: usize },
    #[error("unsupported checkpoint version {0:?}")]
    UnsupportedVersion(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
