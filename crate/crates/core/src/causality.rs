//! Bivariate VAR equations and Granger SSR F-tests.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::dist::f_sf;
use crate::linalg::{ols, LinalgError};
use crate::series::{align_contiguous, WeeklySeries};

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
pub enum CausalityError {
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need more than {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("unrestricted model fits perfectly (zero SSR)")]
    PerfectFit,
}

impl From<LinalgError> for CausalityError {
    fn from(e: LinalgError) -> Self {
        CausalityError::RankDeficient(e.to_string())
    }
}

/// One VAR equation: `y_t = c + sum a_i y_{t-i} + sum b_j x_{t-j} + e_t`.
#[derive(Debug, Clone, Serialize)]
pub struct VarModel {
    pub lag: usize,
    pub intercept: f64,
    pub own: Vec<f64>,
    pub cross: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ssr: f64,
    pub nobs: usize,
}

fn check_inputs(y: &[f64], x: &[f64], p: usize) -> Result<(), CausalityError> {
    if p == 0 {
        return Err(CausalityError::ZeroLag);
    }
    if y.len() != x.len() {
        return Err(CausalityError::LengthMismatch(y.len(), x.len()));
    }
    if y.len() <= 2 * p + 5 {
        return Err(CausalityError::TooShort { need: 2 * p + 5, got: y.len() });
    }
    if let Some(i) = y.iter().zip(x).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(CausalityError::NonFinite(i));
    }
    Ok(())
}

/// Row-major design over `t = p..n` with an intercept, `p` own lags and
/// (optionally) `p` lags of `x`.
fn design(y: &[f64], x: Option<&[f64]>, p: usize) -> (Vec<f64>, usize) {
    let cols = 1 + p + x.map_or(0, |_| p);
    let mut rows = Vec::with_capacity((y.len() - p) * cols);
    for t in p..y.len() {
        rows.push(1.0);
        rows.extend((1..=p).map(|i| y[t - i]));
        if let Some(x) = x {
            rows.extend((1..=p).map(|j| x[t - j]));
        }
    }
    (rows, cols)
}

pub fn fit_var_ols(y: &[f64], x: &[f64], p: usize) -> Result<VarModel, CausalityError> {
    check_inputs(y, x, p)?;
    let (rows, cols) = design(y, Some(x), p);
    let fit = ols(&rows, cols, &y[p..])?;
    Ok(VarModel {
        lag: p,
        intercept: fit.coef[0],
        own: fit.coef[1..=p].to_vec(),
        cross: fit.coef[p + 1..].to_vec(),
        residuals: fit.residuals,
        ssr: fit.ssr,
        nobs: y.len() - p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrangerResult {
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub ssr_restricted: f64,
    pub ssr_unrestricted: f64,
}

/// Tests whether lags of `x` help predict `y`. Both regressions use the
/// same `p`-trimmed sample.
pub fn granger_ftest(y: &[f64], x: &[f64], p: usize) -> Result<GrangerResult, CausalityError> {
    let unrestricted = fit_var_ols(y, x, p)?;
    let (rows, cols) = design(y, None, p);
    let restricted = ols(&rows, cols, &y[p..])?;
    let n = unrestricted.nobs;
    let df_den = n - 2 * p - 1;
    let ssr_u = unrestricted.ssr;
    let ssr_r = restricted.ssr.max(ssr_u);
    let scale = y[p..].iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if ssr_u <= 1e-28 * scale {
        return Err(CausalityError::PerfectFit);
    }
    let f = ((ssr_r - ssr_u) / p as f64) / (ssr_u / df_den as f64);
    Ok(GrangerResult {
        lag: p,
        f_stat: f,
        p_value: f_sf(f, p as f64, df_den as f64),
        df_num: p,
        df_den,
        ssr_restricted: ssr_r,
        ssr_unrestricted: ssr_u,
    })
}

/// Lag minimising the bivariate VAR AIC `ln|Sigma| + 2k/T` over
/// `1..=max_lag`, with all candidates on the `max_lag`-trimmed sample.
pub fn select_lag_aic(y: &[f64], x: &[f64], max_lag: usize) -> Result<usize, CausalityError> {
    check_inputs(y, x, max_lag.max(1))?;
    let mut best: Option<(f64, usize)> = None;
    for p in 1..=max_lag {
        let ys = &y[max_lag - p..];
        let xs = &x[max_lag - p..];
        let (rows, cols) = design(ys, Some(xs), p);
        // second equation swaps roles: x on own lags and y lags
        let (rows_x, _) = design(xs, Some(ys), p);
        let ey = ols(&rows, cols, &ys[p..])?.residuals;
        let ex = ols(&rows_x, cols, &xs[p..])?.residuals;
        let t = ey.len() as f64;
        let syy = ey.iter().map(|e| e * e).sum::<f64>() / t;
        let sxx = ex.iter().map(|e| e * e).sum::<f64>() / t;
        let sxy = ey.iter().zip(&ex).map(|(a, b)| a * b).sum::<f64>() / t;
        let det = syy * sxx - sxy * sxy;
        let aic = det.ln() + 2.0 * (2 * cols) as f64 / t;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, p));
        }
    }
    Ok(best.map(|b| b.1).unwrap_or(1))
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum LagCell {
    Ok(GrangerResult),
    Failed { lag: usize, reason: CausalityError },
}

impl LagCell {
    pub fn p_value(&self) -> Option<f64> {
        match self {
            LagCell::Ok(r) => Some(r.p_value),
            LagCell::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LagRow {
    pub predictor: String,
    pub nobs: usize,
    pub cells: Vec<LagCell>,
}

impl LagRow {
    /// Every cell failed.
    pub fn degenerate(&self) -> bool {
        self.cells.iter().all(|c| matches!(c, LagCell::Failed { .. }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LagTable {
    pub target: String,
    pub lags: Vec<usize>,
    pub rows: Vec<LagRow>,
}

/// Significance stars: `**` below 0.05, `*` below 0.10.
pub fn stars(p: f64) -> &'static str {
    if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// Granger p-values for each predictor (rows) and lag (columns). Each
/// predictor is paired with the target on their longest common run of
/// consecutive present weeks.
pub fn granger_lag_table(target: &WeeklySeries, predictors: &[WeeklySeries], lags: &[usize]) -> LagTable {
    let rows = predictors
        .iter()
        .map(|pred| {
            let (_, cols) = align_contiguous(&[target, pred]);
            let (y, x) = (&cols[0], &cols[1]);
            let cells = lags
                .iter()
                .map(|&p| match granger_ftest(y, x, p) {
                    Ok(r) => LagCell::Ok(r),
                    Err(reason) => LagCell::Failed { lag: p, reason },
                })
                .collect();
            LagRow { predictor: pred.name().to_string(), nobs: y.len(), cells }
        })
        .collect();
    LagTable { target: target.name().to_string(), lags: lags.to_vec(), rows }
}

impl LagTable {
    /// CSV with one row per predictor and starred p-values per lag; failed
    /// cells are blank.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["predictor".to_string()];
        header.extend(self.lags.iter().map(|l| format!("lag{l}")));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.predictor.clone()];
            rec.extend(row.cells.iter().map(|c| match c.p_value() {
                Some(p) => format!("{p:.3}{}", stars(p)),
                None => String::new(),
            }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn zero_regressor_is_rank_deficient() {
        let y = noise(100, 1);
        let x = vec![0.0; 100];
        assert!(matches!(fit_var_ols(&y, &x, 1), Err(CausalityError::RankDeficient(_))));
    }

    #[test]
    fn noiseless_system_identified() {
        let x = noise(60, 2);
        let mut y = vec![0.5; 60];
        for t in 1..60 {
            y[t] = 1.0 + 0.3 * y[t - 1] + 0.2 * x[t - 1];
        }
        let m = fit_var_ols(&y, &x, 1).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-8);
        assert!((m.own[0] - 0.3).abs() < 1e-8);
        assert!((m.cross[0] - 0.2).abs() < 1e-8);
        assert!(m.ssr < 1e-20);
        assert_eq!(m.nobs, 59);
        assert!(matches!(granger_ftest(&y, &x, 1), Err(CausalityError::PerfectFit)));
    }

    #[test]
    fn ar1_coefficient_recovered() {
        let e = noise(1000, 3);
        let mut y = vec![0.0; 1000];
        for t in 1..1000 {
            y[t] = 0.5 * y[t - 1] + e[t];
        }
        let x = noise(1000, 4);
        let m = fit_var_ols(&y, &x, 1).unwrap();
        assert!((m.own[0] - 0.5).abs() < 0.1);
    }

    #[test]
    fn strong_causality_detected() {
        let x = noise(500, 5);
        let e = noise(500, 6);
        let y: Vec<f64> = (0..500).map(|t| if t == 0 { 0.0 } else { x[t - 1] + 0.1 * e[t] }).collect();
        let r = granger_ftest(&y, &x, 1).unwrap();
        assert!(r.p_value < 0.001);
        assert_eq!(r.df_den, 499 - 3);
        assert!(r.ssr_restricted >= r.ssr_unrestricted);
    }

    #[test]
    fn aic_picks_planted_lag() {
        let x = noise(800, 7);
        let e = noise(800, 8);
        let y: Vec<f64> = (0..800).map(|t| if t < 3 { 0.0 } else { 0.8 * x[t - 3] + 0.3 * e[t] }).collect();
        assert_eq!(select_lag_aic(&y, &x, 6).unwrap(), 3);
    }

    #[test]
    fn table_marks_degenerate_rows() {
        use chrono::{Duration, NaiveDate};
        let start = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        let dates: Vec<NaiveDate> = (0..120).map(|i| start + Duration::days(7 * i)).collect();
        let yv = noise(120, 9);
        let y = WeeklySeries::new("Btc", dates.clone(), yv.clone()).unwrap();
        let flat = WeeklySeries::new("Flat", dates.clone(), vec![1.0; 120]).unwrap();
        let mut lead = vec![0.0; 120];
        lead[..117].copy_from_slice(&yv[3..120]);
        let lead = WeeklySeries::new("Lead", dates, lead).unwrap();
        let table = granger_lag_table(&y, &[flat, lead], &[1, 2, 3, 4, 5, 6]);
        assert!(table.rows[0].degenerate());
        assert!(!table.rows[1].degenerate());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("predictor,lag1,lag2,lag3,lag4,lag5,lag6\nFlat,,,,,,\n"));
    }
}
