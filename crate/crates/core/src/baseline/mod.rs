//! ARIMA benchmark and forecast-accuracy comparison.

mod arima;
mod dm;

use std::io::Write;
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

pub use arima::{
    ar_to_pacf, difference, fit_arima, fit_arima_conditioned, forecast_one_step, pacf_to_ar, select_arima_aic, ArimaFit, ArimaOrder,
    ArimaSelection, CandidateRecord,
};
pub use dm::{diebold_mariano, DmResult};

use crate::forecasting::{mae, rmse};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("order {0} outside p,q <= 5, d <= 2")]
    BadOrder(ArimaOrder),
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("horizon {0} invalid")]
    BadHorizon(usize),
    #[error("optimizer did not converge for {order} after {iterations} iterations; last objective values {trace_tail:?}")]
    NoConvergence { order: ArimaOrder, iterations: usize, trace_tail: Vec<f64> },
    #[error("estimates for {0} sit on the stationarity/invertibility boundary")]
    NearUnitRoot(ArimaOrder),
    #[error("{0} fits the data exactly")]
    PerfectFit(ArimaOrder),
    #[error("all {0} candidate orders failed")]
    AllCandidatesFailed(usize),
    #[error("loss differential has zero variance; forecasts are indistinguishable")]
    IndistinguishableForecasts,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub fold: usize,
    pub lstm_rmse: f64,
    pub lstm_mae: f64,
    pub dm: Option<DmResult>,
    pub dm_error: Option<String>,
    pub arima_rmse: f64,
    pub arima_mae: f64,
    pub order: ArimaOrder,
    pub arima_predictions: Vec<f64>,
}

/// Selects an ARIMA order on `target[..fit_end]`, forecasts `test` one
/// step ahead and compares it with the LSTM predictions for the same rows.
pub fn compare_fold(
    fold: usize,
    target: &[f64],
    fit_end: usize,
    test: Range<usize>,
    lstm_pred: &[f64],
) -> Result<ComparisonRow, BaselineError> {
    if lstm_pred.len() != test.len() {
        return Err(BaselineError::LengthMismatch(lstm_pred.len(), test.len()));
    }
    let sel = select_arima_aic(&target[..fit_end], 3, 1, 3)?;
    let preds = forecast_one_step(&sel.fit, &target[..test.end], test.start);
    let actual = &target[test.clone()];
    let e_lstm: Vec<f64> = lstm_pred.iter().zip(actual).map(|(p, a)| a - p).collect();
    let e_arima: Vec<f64> = preds.iter().zip(actual).map(|(p, a)| a - p).collect();
    let (dm, dm_error) = match diebold_mariano(&e_lstm, &e_arima, 1) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ComparisonRow {
        fold,
        lstm_rmse: rmse(lstm_pred, actual),
        lstm_mae: mae(lstm_pred, actual),
        dm,
        dm_error,
        arima_rmse: rmse(&preds, actual),
        arima_mae: mae(&preds, actual),
        order: sel.fit.order,
        arima_predictions: preds,
    })
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

/// Per-fold rows plus `Mean` and `SD` (population) rows.
pub fn write_comparison_csv<W: Write>(writer: W, rows: &[ComparisonRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["Fold", "LSTM RMSE", "LSTM MAE", "DM p-value", "ARIMA RMSE", "ARIMA MAE", "Order (p,d,q)"])?;
    for r in rows {
        w.write_record([
            r.fold.to_string(),
            format!("{:.4}", r.lstm_rmse),
            format!("{:.4}", r.lstm_mae),
            r.dm.as_ref().map_or(String::new(), |d| format!("{:.4}", d.p_value)),
            format!("{:.4}", r.arima_rmse),
            format!("{:.4}", r.arima_mae),
            r.order.to_string(),
        ])?;
    }
    if !rows.is_empty() {
        let cols: [Vec<f64>; 4] = [
            rows.iter().map(|r| r.lstm_rmse).collect(),
            rows.iter().map(|r| r.lstm_mae).collect(),
            rows.iter().map(|r| r.arima_rmse).collect(),
            rows.iter().map(|r| r.arima_mae).collect(),
        ];
        let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_sd(c)).collect();
        for (label, pick) in [("Mean", 0usize), ("SD", 1)] {
            let v = |i: usize| {
                let (m, s) = stats[i];
                format!("{:.4}", if pick == 0 { m } else { s })
            };
            w.write_record([label.to_string(), v(0), v(1), String::new(), v(2), v(3), String::new()])?;
        }
    }
    w.flush()?;
    Ok(())
}
