//! Per-fold search, multi-seed runs and prediction averaging.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldSpec};
use super::lstm::LstmParams;
use super::optim::Optimizer;
use super::tpe::{tpe_search, Dim, TpeConfig};
use super::train::{predict_all, train_lstm, Hyperparams};
use super::window::{window_supervised, Dataset, Standardizer, Windows};
use super::ForecastError;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub units: Vec<usize>,
    pub dropout: (f64, f64),
    pub lookback: Vec<usize>,
    pub learning_rate: (f64, f64),
    pub optimizers: Vec<Optimizer>,
    pub batch_sizes: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            units: vec![8, 16, 32, 64],
            dropout: (0.1, 0.45),
            lookback: vec![4, 8, 13],
            learning_rate: (1e-4, 1e-3),
            optimizers: vec![Optimizer::Adam, Optimizer::RMSprop],
            batch_sizes: vec![8, 16],
        }
    }
}

impl SearchSpace {
    pub fn dims(&self) -> Vec<Dim> {
        vec![
            Dim::Categorical { n: self.units.len() },
            Dim::Continuous { low: self.dropout.0, high: self.dropout.1, log: false },
            Dim::Categorical { n: self.lookback.len() },
            Dim::Continuous { low: self.learning_rate.0, high: self.learning_rate.1, log: true },
            Dim::Categorical { n: self.optimizers.len() },
            Dim::Categorical { n: self.batch_sizes.len() },
        ]
    }

    pub fn hyperparams(&self, point: &[f64], epochs: usize) -> Hyperparams {
        Hyperparams {
            units: self.units[point[0] as usize],
            dropout: point[1],
            lookback: self.lookback[point[2] as usize],
            learning_rate: point[3],
            optimizer: self.optimizers[point[4] as usize],
            batch_size: self.batch_sizes[point[5] as usize],
            clipnorm: 1.0,
            epochs,
        }
    }

    pub fn max_lookback(&self) -> usize {
        self.lookback.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub runs: usize,
    pub trials: usize,
    pub startup_trials: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Every run reuses the run-0 seed.
    pub force_same_seed: bool,
    /// Proportionally shrink folds on grids shorter than 532 weeks.
    pub allow_scaling: bool,
    pub space: SearchSpace,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            runs: 5,
            trials: 75,
            startup_trials: 15,
            max_epochs: 60,
            patience: 10,
            seed: 42,
            force_same_seed: false,
            allow_scaling: false,
            space: SearchSpace::default(),
        }
    }
}

/// Windows for one fold and lookback.
#[derive(Debug, Clone)]
pub struct FoldWindows {
    pub train: Windows,
    pub validation: Windows,
    /// Scaled with train statistics.
    pub search_scaler: Standardizer,
    pub train_val: Windows,
    pub test: Windows,
    /// Scaled with train+validation statistics.
    pub final_scaler: Standardizer,
}

impl FoldWindows {
    pub fn build(ds: &Dataset, fold: &FoldSpec, lookback: usize) -> Result<Self, ForecastError> {
        let n = ds.n_features();
        let search_scaler = Standardizer::fit(ds, fold.train.clone());
        let (x, y) = search_scaler.apply(ds);
        let all = window_supervised(&x, &y, n, lookback)?;
        let final_scaler = Standardizer::fit(ds, 0..fold.validation.end);
        let (xf, yf) = final_scaler.apply(ds);
        let all_final = window_supervised(&xf, &yf, n, lookback)?;
        Ok(Self {
            train: all.select(&fold.train),
            validation: all.select(&fold.validation),
            search_scaler,
            train_val: all_final.select(&(0..fold.validation.end)),
            test: all_final.select(&fold.test),
            final_scaler,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub hyperparams: Hyperparams,
    pub val_loss: Option<f64>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub best: usize,
    pub best_hyperparams: Hyperparams,
    pub best_val_loss: f64,
    /// Epoch budget for the final fits.
    pub final_epochs: usize,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub fold: usize,
    pub run: usize,
    pub seed: u64,
    pub rmse: f64,
    pub mae: f64,
    pub best_val_loss: f64,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub fold: usize,
    pub run: usize,
    pub error: String,
}

/// A trained run kept for attribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunModel {
    pub run: usize,
    pub params: LstmParams,
    /// Test-set predictions on the original scale.
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: FoldSpec,
    pub search: SearchSummary,
    pub runs: Vec<TrainReport>,
    pub failures: Vec<RunFailure>,
    pub models: Vec<RunModel>,
    pub test_dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub ensemble_predictions: Vec<f64>,
    pub ensemble_rmse: f64,
    pub ensemble_mae: f64,
    /// RMSE of predicting the train+validation mean.
    pub mean_predictor_rmse: f64,
    /// Run whose RMSE is the median across runs.
    pub median_run: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub folds: Vec<FoldResult>,
}

impl EnsembleResult {
    pub fn mean_ensemble_rmse(&self) -> f64 {
        self.folds.iter().map(|f| f.ensemble_rmse).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_baseline_rmse(&self) -> f64 {
        self.folds.iter().map(|f| f.mean_predictor_rmse).sum::<f64>() / self.folds.len() as f64
    }

    /// Rows `Fold, Run, RMSE, MAE, Val. Loss, Opt., Lbk., Units`.
    pub fn write_table_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["Fold", "Run", "RMSE", "MAE", "Val. Loss", "Opt.", "Lbk.", "Units"])?;
        for f in &self.folds {
            for r in &f.runs {
                w.write_record([
                    r.fold.to_string(),
                    (r.run + 1).to_string(),
                    format!("{:.4}", r.rmse),
                    format!("{:.4}", r.mae),
                    format!("{:.4}", r.best_val_loss),
                    r.hyperparams.optimizer.name().to_string(),
                    r.hyperparams.lookback.to_string(),
                    r.hyperparams.units.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> f64 {
    (pred.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / actual.len() as f64).sqrt()
}

pub fn mae(pred: &[f64], actual: &[f64]) -> f64 {
    pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / actual.len() as f64
}

fn search_fold(fold: &FoldSpec, windows: &BTreeMap<usize, FoldWindows>, cfg: &EnsembleConfig) -> Result<SearchSummary, ForecastError> {
    let dims = cfg.space.dims();
    let tpe_cfg = TpeConfig { trials: cfg.trials, startup: cfg.startup_trials, ..Default::default() };
    let mut records: Vec<TrialRecord> = Vec::with_capacity(cfg.trials);
    let outcome = tpe_search(
        &dims,
        |i, point| {
            let hp = cfg.space.hyperparams(point, cfg.max_epochs);
            let fw = &windows[&hp.lookback];
            let seed = derive_seed(cfg.seed, "trial", &[fold.fold_id as u64, i as u64]);
            let res = train_lstm(&fw.train, Some((&fw.validation, cfg.patience)), &hp, seed);
            log::debug!("fold {} trial {}: {:?}", fold.fold_id, i, res.as_ref().map(|r| r.best_val_loss));
            match res {
                Ok(fit) => {
                    let loss = fit.best_val_loss.expect("validation set present");
                    records.push(TrialRecord { hyperparams: hp, val_loss: Some(loss), best_epoch: Some(fit.best_epoch), error: None });
                    Ok(loss)
                }
                Err(e) => {
                    records.push(TrialRecord { hyperparams: hp, val_loss: None, best_epoch: None, error: Some(e.to_string()) });
                    Err(e.to_string())
                }
            }
        },
        &tpe_cfg,
        derive_seed(cfg.seed, "tpe", &[fold.fold_id as u64]),
    )?;
    let best = &records[outcome.best];
    Ok(SearchSummary {
        best: outcome.best,
        best_hyperparams: best.hyperparams.clone(),
        best_val_loss: outcome.best_loss,
        final_epochs: best.best_epoch.unwrap_or(1).max(1),
        trials: records,
    })
}

/// Runs the search and `runs` seeded fits for one fold.
pub fn run_fold(ds: &Dataset, fold: &FoldSpec, cfg: &EnsembleConfig) -> Result<FoldResult, ForecastError> {
    let mut windows = BTreeMap::new();
    for &l in &cfg.space.lookback {
        windows.insert(l, FoldWindows::build(ds, fold, l)?);
    }
    let search = search_fold(fold, &windows, cfg)?;
    let hp = search.best_hyperparams.clone();
    let fw = &windows[&hp.lookback];
    let actual: Vec<f64> = fw.test.label_rows.iter().map(|&r| ds.target[r]).collect();
    let test_dates: Vec<NaiveDate> = fw.test.label_rows.iter().map(|&r| ds.dates[r]).collect();
    let final_hp = Hyperparams { epochs: search.final_epochs, ..hp.clone() };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut models = Vec::new();
    for run in 0..cfg.runs {
        let key = if cfg.force_same_seed { 0 } else { run as u64 };
        let seed = derive_seed(cfg.seed, "run", &[fold.fold_id as u64, key]);
        let attempt = train_lstm(&fw.train, Some((&fw.validation, cfg.patience)), &hp, seed).and_then(|val_fit| {
            let fit = train_lstm(&fw.train_val, None, &final_hp, seed)?;
            let preds: Vec<f64> = predict_all(&fit.params, &fw.test).into_iter().map(|z| fw.final_scaler.invert_target(z)).collect();
            Ok((val_fit.best_val_loss.expect("validation set present"), fit.params, preds))
        });
        match attempt {
            Ok((val_loss, params, preds)) => {
                runs.push(TrainReport {
                    fold: fold.fold_id,
                    run,
                    seed,
                    rmse: rmse(&preds, &actual),
                    mae: mae(&preds, &actual),
                    best_val_loss: val_loss,
                    hyperparams: final_hp.clone(),
                });
                models.push(RunModel { run, params, predictions: preds });
            }
            Err(e) => failures.push(RunFailure { fold: fold.fold_id, run, error: e.to_string() }),
        }
    }
    if models.is_empty() {
        return Err(ForecastError::AllRunsFailed(fold.fold_id));
    }
    let mut ensemble_predictions = vec![0.0; actual.len()];
    for m in &models {
        for (e, p) in ensemble_predictions.iter_mut().zip(&m.predictions) {
            *e += p / models.len() as f64;
        }
    }
    let mut ranked: Vec<&TrainReport> = runs.iter().collect();
    ranked.sort_by(|a, b| a.rmse.total_cmp(&b.rmse).then(a.run.cmp(&b.run)));
    let median_run = Some(ranked[(ranked.len() - 1) / 2].run);
    let train_mean = fw.final_scaler.target_mean;
    Ok(FoldResult {
        fold: fold.clone(),
        ensemble_rmse: rmse(&ensemble_predictions, &actual),
        ensemble_mae: mae(&ensemble_predictions, &actual),
        mean_predictor_rmse: rmse(&vec![train_mean; actual.len()], &actual),
        search,
        runs,
        failures,
        models,
        test_dates,
        actual,
        ensemble_predictions,
        median_run,
    })
}

/// Four walk-forward folds, each searched once and fitted `runs` times.
pub fn walk_forward_ensemble(ds: &Dataset, cfg: &EnsembleConfig) -> Result<EnsembleResult, ForecastError> {
    let folds = make_folds(&ds.dates, cfg.allow_scaling)?;
    let mut out = Vec::with_capacity(folds.len());
    for fold in &folds {
        log::info!("fold {}: train {} val {} test {}", fold.fold_id, fold.train.len(), fold.validation.len(), fold.test.len());
        out.push(run_fold(ds, fold, cfg)?);
    }
    Ok(EnsembleResult { config: cfg.clone(), folds: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    fn planted(n: usize) -> Dataset {
        let mut rng = stream(11, "planted", &[]);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = 0.9 * x[t - 1] + 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng);
        }
        let dates = crate::series::friday_grid(
            NaiveDate::from_ymd_opt(2014, 1, 3).unwrap(),
            NaiveDate::from_ymd_opt(2014, 1, 3).unwrap() + chrono::Duration::weeks(n as i64 - 1),
        );
        Dataset::new(dates, "y", vec!["x".into()], x, y).unwrap()
    }

    fn small_cfg() -> EnsembleConfig {
        EnsembleConfig {
            runs: 3,
            trials: 4,
            startup_trials: 4,
            max_epochs: 200,
            allow_scaling: true,
            space: SearchSpace {
                units: vec![8],
                lookback: vec![4],
                batch_sizes: vec![8],
                learning_rate: (5e-4, 1e-3),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_runs_collapse() {
        let ds = planted(200);
        let cfg = EnsembleConfig { force_same_seed: true, ..small_cfg() };
        let folds = make_folds(&ds.dates, true).unwrap();
        let r = run_fold(&ds, &folds[0], &cfg).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert!((r.ensemble_rmse - r.runs[0].rmse).abs() < 1e-12);
        assert!((r.ensemble_mae - r.runs[0].mae).abs() < 1e-12);
    }

    #[test]
    fn ensemble_beats_mean_and_tracks_best_run() {
        let ds = planted(400);
        let res = walk_forward_ensemble(&ds, &small_cfg()).unwrap();
        assert_eq!(res.folds.len(), 4);
        for f in &res.folds {
            let best = f.runs.iter().map(|r| r.rmse).fold(f64::INFINITY, f64::min);
            assert!(f.ensemble_rmse <= best * 1.1, "{} vs {}", f.ensemble_rmse, best);
            assert!(f.median_run.is_some());
        }
        assert!(res.mean_ensemble_rmse() <= 0.5 * res.mean_baseline_rmse());
        let mut buf = Vec::new();
        res.write_table_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Fold,Run,RMSE,MAE,Val. Loss,Opt.,Lbk.,Units\n1,1,"));
        assert_eq!(text.lines().count(), 1 + 4 * 3);
    }
}
