//! Aligned feature matrix, train-range standardisation and supervised windows.

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ForecastError;
use crate::series::{align_contiguous, WeeklySeries};

/// Target plus `N` features on a common gap-free weekly grid.
#[derive(Debug, Clone, Serialize)]
pub struct Dataset {
    pub dates: Vec<NaiveDate>,
    pub target_name: String,
    pub feature_names: Vec<String>,
    /// `n x N` row-major.
    pub features: Vec<f64>,
    pub target: Vec<f64>,
}

impl Dataset {
    pub fn new(
        dates: Vec<NaiveDate>,
        target_name: impl Into<String>,
        feature_names: Vec<String>,
        features: Vec<f64>,
        target: Vec<f64>,
    ) -> Result<Self, ForecastError> {
        let n = dates.len();
        if target.len() != n || features.len() != n * feature_names.len() || feature_names.is_empty() {
            return Err(ForecastError::Shape(format!(
                "{} dates, {} targets, {} feature values for {} features",
                n,
                target.len(),
                features.len(),
                feature_names.len()
            )));
        }
        if features.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(ForecastError::Shape("dataset contains missing or non-finite values".into()));
        }
        Ok(Self { dates, target_name: target_name.into(), feature_names, features, target })
    }

    /// Longest run of weeks where the target and every feature are present.
    pub fn from_series(target: &WeeklySeries, features: &[&WeeklySeries]) -> Result<Self, ForecastError> {
        let mut all = vec![target];
        all.extend_from_slice(features);
        let (dates, cols) = align_contiguous(&all);
        let n = dates.len();
        let nf = features.len();
        let mut rows = vec![0.0; n * nf];
        for (j, col) in cols[1..].iter().enumerate() {
            for t in 0..n {
                rows[t * nf + j] = col[t];
            }
        }
        let names = features.iter().map(|s| s.name().to_string()).collect();
        Self::new(dates, target.name(), names, rows, cols[0].clone())
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// Per-column z-score parameters fitted on a prefix of the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub fitted_rows: Range<usize>,
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub target_mean: f64,
    pub target_sd: f64,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    // constant columns pass through centred
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    (mean, sd)
}

impl Standardizer {
    /// Fits on rows `rows` only.
    pub fn fit(ds: &Dataset, rows: Range<usize>) -> Self {
        let nf = ds.n_features();
        let (feature_mean, feature_sd) = (0..nf).map(|j| mean_sd(rows.clone().map(|t| ds.features[t * nf + j]))).unzip();
        let (target_mean, target_sd) = mean_sd(ds.target[rows.clone()].iter().copied());
        Self { fitted_rows: rows, feature_mean, feature_sd, target_mean, target_sd }
    }

    pub fn apply(&self, ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
        let nf = ds.n_features();
        let x = ds.features.iter().enumerate().map(|(i, v)| (v - self.feature_mean[i % nf]) / self.feature_sd[i % nf]).collect();
        let y = ds.target.iter().map(|v| (v - self.target_mean) / self.target_sd).collect();
        (x, y)
    }

    pub fn invert_target(&self, z: f64) -> f64 {
        z * self.target_sd + self.target_mean
    }
}

/// Supervised samples: window `s` covers rows `label[s]-L .. label[s]-1`
/// and predicts the target at row `label[s]`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Windows {
    pub lookback: usize,
    pub n_features: usize,
    /// `count x L x N` row-major.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub label_rows: Vec<usize>,
}

impl Windows {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn window(&self, s: usize) -> &[f64] {
        let w = self.lookback * self.n_features;
        &self.x[s * w..(s + 1) * w]
    }

    /// Samples whose label row falls in `rows`.
    pub fn select(&self, rows: &Range<usize>) -> Windows {
        let w = self.lookback * self.n_features;
        let mut out = Windows { lookback: self.lookback, n_features: self.n_features, ..Default::default() };
        for (s, &r) in self.label_rows.iter().enumerate() {
            if rows.contains(&r) {
                out.x.extend_from_slice(&self.x[s * w..(s + 1) * w]);
                out.y.push(self.y[s]);
                out.label_rows.push(r);
            }
        }
        out
    }
}

/// Every window of `lookback` consecutive rows with the next row's target as
/// label; yields `n - lookback` samples.
pub fn window_supervised(features: &[f64], target: &[f64], n_features: usize, lookback: usize) -> Result<Windows, ForecastError> {
    let n = target.len();
    if features.len() != n * n_features {
        return Err(ForecastError::Shape(format!("{} feature values for {} rows x {} features", features.len(), n, n_features)));
    }
    if lookback == 0 || lookback >= n {
        return Err(ForecastError::LookbackTooLong { lookback, len: n });
    }
    let mut out = Windows { lookback, n_features, ..Default::default() };
    out.x.reserve((n - lookback) * lookback * n_features);
    for label in lookback..n {
        out.x.extend_from_slice(&features[(label - lookback) * n_features..label * n_features]);
        out.y.push(target[label]);
        out.label_rows.push(label);
    }
    Ok(out)
}
