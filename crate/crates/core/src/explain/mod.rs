//! Shapley attributions for the fitted forecasters, their aggregation and
//! the regime-conditional interaction regression.

mod aggregate;
mod interaction;
mod kernel;

use std::io::Write;

use chrono::NaiveDate;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate_attributions, AggregateMode, FoldCell, ImportanceRow, ImportanceTable};
pub use interaction::{
    interaction_analysis, interaction_by_regime, InteractionPoint, InteractionResult, InteractionScope, OmittedRegime, RegimeFits,
    RegimeSlope, DISPLAY_P,
};
pub use kernel::{exact_shapley, kernel_shap, min_nsamples, Explanation};

use crate::forecasting::lstm::Workspace;
use crate::forecasting::{Dataset, EnsembleResult, FoldWindows, LstmParams};
use crate::rng::stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("{0}")]
    Shape(String),
    #[error("non-finite input or model output")]
    NonFinite,
    #[error("coalition budget {nsamples} is below the minimum {min}")]
    BudgetTooSmall { nsamples: usize, min: usize },
    #[error("weighted coalition system is singular with {nsamples} samples; increase nsamples")]
    Singular { nsamples: usize },
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Training windows averaged over for absent players.
    pub background: usize,
    /// Coalitions per instance; `None` uses `2M + 2048`.
    pub nsamples: Option<usize>,
    pub seed: u64,
    /// Explain every run rather than only the median-RMSE run.
    pub all_runs: bool,
    /// Explain at most this many test windows per fold, evenly spaced.
    pub max_instances: Option<usize>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self { background: 50, nsamples: None, seed: 42, all_runs: true, max_instances: None }
    }
}

impl ExplainConfig {
    pub fn budget(&self, players: usize) -> usize {
        self.nsamples.unwrap_or(2 * players + 2048)
    }
}

/// Attribution of one test window for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainedSample {
    pub fold: usize,
    pub run: usize,
    /// Date of the forecast target.
    pub date: NaiveDate,
    /// Date of the last window row.
    pub window_end: NaiveDate,
    pub lookback: usize,
    pub base_value: f64,
    pub prediction: f64,
    /// `lookback x N` in window order: row 0 is the oldest.
    pub phi: Vec<f64>,
    pub coalitions: usize,
    pub exhaustive: bool,
}

impl ExplainedSample {
    pub fn additivity_residual(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.prediction).abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FoldMeta {
    pub fold: usize,
    pub lookback: usize,
    pub players: usize,
    pub nsamples: usize,
    /// Label dates of the background windows.
    pub background_dates: Vec<NaiveDate>,
    pub runs: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShapMeta {
    pub background: usize,
    pub seed: u64,
    pub scale: String,
    pub folds: Vec<FoldMeta>,
}

/// Per (fold, run, sample, lag, feature) attributions on the standardized
/// target scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionTensor {
    pub feature_names: Vec<String>,
    pub samples: Vec<ExplainedSample>,
    pub meta: ShapMeta,
}

impl AttributionTensor {
    /// Samples in (fold, run, date) order.
    pub fn sorted_samples(&self) -> Vec<&ExplainedSample> {
        let mut s: Vec<&ExplainedSample> = self.samples.iter().collect();
        s.sort_by_key(|x| (x.fold, x.run, x.date));
        s
    }

    pub fn max_additivity_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.additivity_residual()).fold(0.0, f64::max)
    }

    /// Flat rows `fold,run,sample_date,lag,feature,phi`; lag 0 is the most
    /// recent window row.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fold", "run", "sample_date", "lag", "feature", "phi"])?;
        let n = self.feature_names.len();
        for s in self.sorted_samples() {
            for lag in 0..s.lookback {
                let row = s.lookback - 1 - lag;
                for (f, name) in self.feature_names.iter().enumerate() {
                    w.write_record([
                        s.fold.to_string(),
                        s.run.to_string(),
                        s.date.to_string(),
                        lag.to_string(),
                        name.clone(),
                        s.phi[row * n + f].to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Batched model output for `k x (L*N)` row-major windows.
fn lstm_predictor(params: &LstmParams, lookback: usize) -> impl FnMut(&[f64]) -> Vec<f64> + '_ {
    const CHUNK: usize = 256;
    let width = lookback * params.n_features;
    let mut ws = Workspace::new(params.n_features, params.units, lookback);
    let mut buf = Vec::with_capacity(CHUNK);
    move |rows: &[f64]| {
        let mut out = Vec::with_capacity(rows.len() / width);
        for chunk in rows.chunks(CHUNK * width) {
            let windows: Vec<&[f64]> = chunk.chunks(width).collect();
            params.forward_batch(&windows, lookback, None, &mut ws, &mut buf);
            out.extend_from_slice(&buf);
        }
        out
    }
}

/// `k` indices spread evenly over `0..n`.
fn spread(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

/// Attributes each fold's test predictions to (lag, feature) cells with
/// KernelSHAP. The background is drawn from the windows the final models
/// were trained on, scaled the same way.
pub fn explain_ensemble(ds: &Dataset, ens: &EnsembleResult, cfg: &ExplainConfig) -> Result<AttributionTensor, ExplainError> {
    if cfg.background == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let mut samples = Vec::new();
    let mut folds = Vec::new();
    for fr in &ens.folds {
        let fold = fr.fold.fold_id;
        let fail = |message: String| ExplainError::Fold { fold, message };
        let lookback = fr.search.best_hyperparams.lookback;
        let fw = FoldWindows::build(ds, &fr.fold, lookback).map_err(|e| fail(e.to_string()))?;
        let width = lookback * ds.n_features();
        let nsamples = cfg.budget(width);
        if nsamples < min_nsamples(width) {
            return Err(ExplainError::BudgetTooSmall { nsamples, min: min_nsamples(width) });
        }
        let pool = &fw.train_val;
        let mut rng = stream(cfg.seed, "shap-background", &[fold as u64]);
        let mut picks = sample(&mut rng, pool.len(), cfg.background.min(pool.len())).into_vec();
        picks.sort_unstable();
        let background: Vec<f64> = picks.iter().flat_map(|&s| pool.window(s).iter().copied()).collect();
        let background_dates = picks.iter().map(|&s| ds.dates[pool.label_rows[s]]).collect();

        let models: Vec<_> = fr.models.iter().filter(|m| cfg.all_runs || Some(m.run) == fr.median_run).collect();
        let instances = spread(fw.test.len(), cfg.max_instances.unwrap_or(usize::MAX));
        for m in &models {
            let mut predict = lstm_predictor(&m.params, lookback);
            for &s in &instances {
                let mut rng = stream(cfg.seed, "shap", &[fold as u64, m.run as u64, s as u64]);
                let e = kernel_shap(&mut predict, &background, fw.test.window(s), nsamples, &mut rng)?;
                let row = fw.test.label_rows[s];
                samples.push(ExplainedSample {
                    fold,
                    run: m.run,
                    date: ds.dates[row],
                    window_end: ds.dates[row - 1],
                    lookback,
                    base_value: e.base_value,
                    prediction: e.prediction,
                    phi: e.phi,
                    coalitions: e.coalitions,
                    exhaustive: e.exhaustive,
                });
            }
            log::info!("fold {fold} run {}: explained {} windows", m.run, instances.len());
        }
        folds.push(FoldMeta { fold, lookback, players: width, nsamples, background_dates, runs: models.iter().map(|m| m.run).collect() });
    }
    Ok(AttributionTensor {
        feature_names: ds.feature_names.clone(),
        samples,
        meta: ShapMeta { background: cfg.background, seed: cfg.seed, scale: "standardized".into(), folds },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_is_even_and_bounded() {
        assert_eq!(spread(10, 3), vec![0, 3, 6]);
        assert_eq!(spread(4, 10), vec![0, 1, 2, 3]);
    }

    #[test]
    fn lstm_predictor_matches_single_predictions() {
        let params = LstmParams::init(3, 4, &mut stream(1, "p", &[]));
        let rows: Vec<f64> = (0..5 * 2 * 3).map(|i| (i as f64 * 0.37).sin()).collect();
        let got = lstm_predictor(&params, 2)(&rows);
        for (w, g) in rows.chunks(6).zip(&got) {
            assert!((params.predict(w, 2).unwrap() - g).abs() < 1e-12);
        }
    }
}
