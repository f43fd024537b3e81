//! Mini-batch training with clipping, dropout and early stopping.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{LstmParams, Workspace};
use super::optim::{clip_global_norm, Optimizer, OptimizerState};
use super::window::Windows;
use super::ForecastError;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub units: usize,
    pub dropout: f64,
    pub lookback: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub clipnorm: f64,
    /// Epoch cap during search; exact budget for a final fit.
    pub epochs: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            units: 16,
            dropout: 0.2,
            lookback: 8,
            learning_rate: 5e-4,
            optimizer: Optimizer::Adam,
            batch_size: 16,
            clipnorm: 1.0,
            epochs: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub params: LstmParams,
    /// Mean mini-batch loss per epoch (with dropout active).
    pub train_loss: Vec<f64>,
    /// Validation MSE per epoch, empty without a validation set.
    pub val_loss: Vec<f64>,
    pub best_val_loss: Option<f64>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Largest gradient norm seen after clipping.
    pub max_clipped_norm: f64,
}

/// Mean squared error of dropout-free predictions.
pub fn evaluate_mse(params: &LstmParams, w: &Windows) -> f64 {
    let preds = predict_all(params, w);
    preds.iter().zip(&w.y).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / w.len() as f64
}

pub fn predict_all(params: &LstmParams, w: &Windows) -> Vec<f64> {
    const CHUNK: usize = 64;
    let mut ws = Workspace::new(params.n_features, params.units, w.lookback);
    let mut out = Vec::with_capacity(w.len());
    let mut buf = Vec::with_capacity(CHUNK);
    for start in (0..w.len()).step_by(CHUNK) {
        let windows: Vec<&[f64]> = (start..(start + CHUNK).min(w.len())).map(|s| w.window(s)).collect();
        params.forward_batch(&windows, w.lookback, None, &mut ws, &mut buf);
        out.extend_from_slice(&buf);
    }
    out
}

/// Trains on `train`. With `early_stop = Some((val, patience))` training
/// stops once validation loss has not improved for `patience` epochs and
/// the best weights are restored; otherwise it runs exactly `hp.epochs`.
pub fn train_lstm(
    train: &Windows,
    early_stop: Option<(&Windows, usize)>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<FitOutcome, ForecastError> {
    if train.is_empty() {
        return Err(ForecastError::EmptySplit("train"));
    }
    if let Some((val, _)) = early_stop {
        if val.is_empty() {
            return Err(ForecastError::EmptySplit("validation"));
        }
    }
    if hp.batch_size == 0 || hp.epochs == 0 || hp.units == 0 || !(0.0..1.0).contains(&hp.dropout) {
        return Err(ForecastError::Shape(format!("invalid hyperparameters {hp:?}")));
    }
    let (n, u, l) = (train.n_features, hp.units, train.lookback);
    let mut params = LstmParams::init(n, u, &mut stream(seed, "lstm-init", &[]));
    let mut rng = stream(seed, "lstm-train", &[]);
    let mut opt = OptimizerState::new(hp.optimizer, hp.learning_rate, params.theta.len());
    let mut grad = vec![0.0; params.theta.len()];
    let mut ws = Workspace::new(n, u, l);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut masks: Vec<f64> = Vec::with_capacity(hp.batch_size * u);
    let mut preds = Vec::with_capacity(hp.batch_size);
    let mut d_out = Vec::with_capacity(hp.batch_size);
    let keep = 1.0 - hp.dropout;

    let mut out = FitOutcome {
        params: params.clone(),
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_val_loss: None,
        best_epoch: 0,
        epochs_run: 0,
        max_clipped_norm: 0.0,
    };
    let mut since_best = 0;
    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            grad.fill(0.0);
            let scale = 2.0 / batch.len() as f64;
            let windows: Vec<&[f64]> = batch.iter().map(|&s| train.window(s)).collect();
            let masks = if hp.dropout > 0.0 {
                masks.clear();
                masks.extend((0..batch.len() * u).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }));
                Some(&masks[..])
            } else {
                None
            };
            params.forward_batch(&windows, l, masks, &mut ws, &mut preds);
            d_out.clear();
            for (p, &s) in preds.iter().zip(batch) {
                let err = p - train.y[s];
                epoch_loss += err * err;
                d_out.push(scale * err);
            }
            params.backward_batch(l, masks, &d_out, &mut ws, &mut grad);
            let norm = clip_global_norm(&mut grad, hp.clipnorm);
            out.max_clipped_norm = out.max_clipped_norm.max(norm.min(hp.clipnorm));
            opt.step(&mut params.theta, &grad);
        }
        let loss = epoch_loss / train.len() as f64;
        if !loss.is_finite() || !params.is_finite() {
            return Err(ForecastError::Diverged { last_finite_epoch: epoch - 1 });
        }
        out.train_loss.push(loss);
        out.epochs_run = epoch;
        match early_stop {
            Some((val, patience)) => {
                let v = evaluate_mse(&params, val);
                if !v.is_finite() {
                    return Err(ForecastError::Diverged { last_finite_epoch: epoch - 1 });
                }
                out.val_loss.push(v);
                if out.best_val_loss.is_none_or(|b| v < b) {
                    out.best_val_loss = Some(v);
                    out.best_epoch = epoch;
                    out.params = params.clone();
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= patience {
                        break;
                    }
                }
            }
            None => {
                out.best_epoch = epoch;
            }
        }
    }
    if early_stop.is_none() {
        out.params = params;
    }
    Ok(out)
}
