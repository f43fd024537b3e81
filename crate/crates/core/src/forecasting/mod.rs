//! LSTM forecasting with walk-forward folds, TPE search and ensembling.

mod ensemble;
mod folds;
pub(crate) mod lstm;
mod optim;
mod tpe;
mod train;
mod window;

use thiserror::Error;

pub use ensemble::{
    mae, rmse, run_fold, walk_forward_ensemble, EnsembleConfig, EnsembleResult, FoldResult, FoldWindows, RunFailure, RunModel, SearchSpace,
    SearchSummary, TrainReport, TrialRecord,
};
pub use folds::{make_folds, FoldSpec, FOLDS, MIN_UNSCALED_WEEKS};
pub use lstm::LstmParams;
pub use optim::{clip_global_norm, Optimizer, OptimizerState};
pub use tpe::{tpe_search, Dim, TpeConfig, TpeOutcome, Trial};
pub use train::{evaluate_mse, predict_all, train_lstm, FitOutcome, Hyperparams};
pub use window::{window_supervised, Dataset, Standardizer, Windows};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("grid has {got} weeks; at least {need} needed (enable scaling for shorter grids)")]
    GridTooShort { got: usize, need: usize },
    #[error("lookback {lookback} must be below series length {len}")]
    LookbackTooLong { lookback: usize, len: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("training diverged; last finite epoch {last_finite_epoch}")]
    Diverged { last_finite_epoch: usize },
    #[error("all {0} search trials failed")]
    SearchFailed(usize),
    #[error("every run of fold {0} failed")]
    AllRunsFailed(usize),
}
