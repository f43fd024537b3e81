//! Unit-root, rank and variance-homogeneity tests.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::dist::{chi2_sf, f_sf, normal_cdf};
use crate::linalg::{ols, LinalgError};
use crate::messages::Regime;
use crate::series::{percentile, WeeklySeries};

#[derive(Debug, Error, PartialEq)]
pub enum TestError {
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
    #[error("need at least two nonempty groups")]
    TooFewGroups,
    #[error("group {0} has fewer than {1} observations")]
    SmallGroup(usize, usize),
    #[error("degenerate test: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom, or the selected lag order for ADF.
    pub df: usize,
    /// Denominator degrees of freedom for F-based tests.
    pub df_den: Option<usize>,
    pub method: &'static str,
}

// MacKinnon (1994) approximate p-value surface, constant only, one series.
const TAU_MAX_C: f64 = 2.74;
const TAU_MIN_C: f64 = -18.83;
const TAU_STAR_C: f64 = -1.61;
const TAU_C_SMALLP: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const TAU_C_LARGEP: [f64; 4] = [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2];

// MacKinnon (2010) critical-value response surface, constant only:
// cv(T) = b0 + b1/T + b2/T^2 + b3/T^3 for the 1%, 5%, 10% levels.
const CV_C: [[f64; 4]; 3] = [[-3.43035, -6.5393, -16.786, -79.433], [-2.86154, -2.8903, -4.234, -40.040], [-2.56677, -1.5384, -2.809, 0.0]];

fn polyval_ascending(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate asymptotic p-value of a constant-only Dickey-Fuller t-ratio.
pub fn mackinnon_p(tau: f64) -> f64 {
    if tau > TAU_MAX_C {
        return 1.0;
    }
    if tau < TAU_MIN_C {
        return 0.0;
    }
    let z = if tau <= TAU_STAR_C { polyval_ascending(&TAU_C_SMALLP, tau) } else { polyval_ascending(&TAU_C_LARGEP, tau) };
    normal_cdf(z)
}

/// Finite-sample critical values at 1%, 5% and 10%.
pub fn adf_critical_values(nobs: usize) -> [f64; 3] {
    let t = nobs as f64;
    CV_C.map(|b| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t))
}

/// Schwert's rule `floor(12 (n/100)^(1/4))`.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct AdfFit {
    tau: f64,
    ssr: f64,
    nobs: usize,
}

fn adf_regression(y: &[f64], dy: &[f64], lag: usize, start: usize) -> Result<AdfFit, TestError> {
    // rows: dy[t] for t in start..dy.len(); dy[t] = y[t+1] - y[t]
    let cols = 2 + lag;
    let mut x = Vec::with_capacity((dy.len() - start) * cols);
    let mut resp = Vec::with_capacity(dy.len() - start);
    for t in start..dy.len() {
        x.push(1.0);
        x.push(y[t]);
        for j in 1..=lag {
            x.push(dy[t - j]);
        }
        resp.push(dy[t]);
    }
    let fit = ols(&x, cols, &resp)?;
    let nobs = resp.len();
    let sigma2 = fit.ssr / (nobs - cols) as f64;
    let se = (sigma2 * fit.xtx_inv_diag[1]).sqrt();
    if !(se > 0.0) {
        return Err(TestError::Degenerate("perfect fit in ADF regression"));
    }
    Ok(AdfFit { tau: fit.coef[1] / se, ssr: fit.ssr, nobs })
}

/// Augmented Dickey-Fuller test with a constant. The augmentation order is
/// chosen by AIC over `0..=max_lag` on a common sample, then refit on the
/// longest sample available for that order.
pub fn adf_test(y: &[f64], max_lag: usize) -> Result<TestResult, TestError> {
    let n = y.len();
    if n < max_lag + 10 {
        return Err(TestError::TooShort { need: max_lag + 10, got: n });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(TestError::NonFinite(i));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if !(var > f64::EPSILON * mean.abs().max(1.0).powi(2)) {
        return Err(TestError::ZeroVariance);
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mut best: Option<(f64, usize)> = None;
    for lag in 0..=max_lag {
        let fit = adf_regression(y, &dy, lag, max_lag)?;
        let k = (lag + 2) as f64;
        let aic = fit.nobs as f64 * (fit.ssr / fit.nobs as f64).ln() + 2.0 * k;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, lag));
        }
    }
    let lag = best.expect("at least one lag").1;
    let fit = adf_regression(y, &dy, lag, lag)?;
    Ok(TestResult { statistic: fit.tau, p_value: mackinnon_p(fit.tau), df: lag, df_den: None, method: "adf-constant" })
}

/// Mid-ranks (1-based) and the tie term `sum(t^3 - t)`.
fn rank_with_ties(values: &[f64]) -> (Vec<f64>, f64) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in &idx[i..=j] {
            ranks[*k] = avg;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Kruskal-Wallis H with tie correction; chi-square reference.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult, TestError> {
    let groups: Vec<&Vec<f64>> = groups.iter().filter(|g| !g.is_empty()).collect();
    if groups.len() < 2 {
        return Err(TestError::TooFewGroups);
    }
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let n = all.len();
    if n < 5 {
        return Err(TestError::TooShort { need: 5, got: n });
    }
    let (ranks, ties) = rank_with_ties(&all);
    let nf = n as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for g in &groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (nf * (nf + 1.0)) * h - 3.0 * (nf + 1.0);
    let correction = 1.0 - ties / (nf * nf * nf - nf);
    let df = groups.len() - 1;
    if correction <= 0.0 {
        // every observation tied
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, df, df_den: None, method: "kruskal-wallis" });
    }
    let h = (h / correction).max(0.0);
    Ok(TestResult { statistic: h, p_value: chi2_sf(h, df as f64), df, df_den: None, method: "kruskal-wallis" })
}

/// Levene's W on absolute deviations from group means; F reference.
pub fn levene_test(groups: &[Vec<f64>]) -> Result<TestResult, TestError> {
    if groups.len() < 2 {
        return Err(TestError::TooFewGroups);
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(TestError::SmallGroup(i, 2));
    }
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            g.iter().map(|v| (v - m).abs()).collect()
        })
        .collect();
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let zbar_i: Vec<f64> = z.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let zbar = z.iter().flatten().sum::<f64>() / n as f64;
    let between: f64 = z.iter().zip(&zbar_i).map(|(g, m)| g.len() as f64 * (m - zbar).powi(2)).sum();
    let within: f64 = z.iter().zip(&zbar_i).map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sum();
    let (df1, df2) = (k - 1, n - k);
    let scale = zbar.abs().max(f64::MIN_POSITIVE);
    if within <= 1e-24 * scale * scale * n as f64 {
        if between <= 1e-24 * scale * scale * n as f64 {
            return Ok(TestResult { statistic: 0.0, p_value: 1.0, df: df1, df_den: Some(df2), method: "levene-mean" });
        }
        return Err(TestError::Degenerate("zero within-group dispersion"));
    }
    let w = (df2 as f64 / df1 as f64) * between / within;
    Ok(TestResult { statistic: w, p_value: f_sf(w, df1 as f64, df2 as f64), df: df1, df_den: Some(df2), method: "levene-mean" })
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeGroupStats {
    pub regime: Regime,
    pub n: usize,
    pub q5: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeTests {
    pub kruskal: TestResult,
    pub levene: TestResult,
    pub max_tail_q5: f64,
    pub tail_regime: Regime,
    pub groups: Vec<RegimeGroupStats>,
}

/// Groups returns by the regime label of the same date and compares the
/// groups' location and spread.
pub fn regime_distribution_tests(returns: &WeeklySeries, labels: &[(NaiveDate, Regime)]) -> Result<RegimeTests, TestError> {
    let label_of: BTreeMap<NaiveDate, Regime> = labels.iter().copied().collect();
    let mut grouped: BTreeMap<Regime, Vec<f64>> = BTreeMap::new();
    for (d, v) in returns.present() {
        if let Some(r) = label_of.get(&d) {
            grouped.entry(*r).or_default().push(v);
        }
    }
    if grouped.len() < 2 {
        return Err(TestError::TooFewGroups);
    }
    let groups: Vec<Vec<f64>> = grouped.values().cloned().collect();
    let kruskal = kruskal_wallis(&groups)?;
    let levene = levene_test(&groups)?;
    let stats: Vec<RegimeGroupStats> =
        grouped.iter().map(|(r, g)| RegimeGroupStats { regime: *r, n: g.len(), q5: percentile(g, 0.05) }).collect();
    let tail = stats.iter().min_by(|a, b| a.q5.total_cmp(&b.q5)).expect("two groups");
    Ok(RegimeTests { kruskal, levene, max_tail_q5: tail.q5, tail_regime: tail.regime, groups: stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mackinnon_reference_points() {
        // statsmodels.tsa.adfvalues.mackinnonp(-2.86, regression="c") = 0.050201, (-3.43) = 0.009978
        assert!((mackinnon_p(-2.86) - 0.05).abs() < 0.002);
        assert!((mackinnon_p(-3.43) - 0.01).abs() < 0.001);
        assert_eq!(mackinnon_p(3.0), 1.0);
        assert_eq!(mackinnon_p(-20.0), 0.0);
        let cv = adf_critical_values(100_000);
        assert!((cv[1] + 2.86).abs() < 0.01);
    }

    #[test]
    fn adf_errors() {
        assert_eq!(adf_test(&[2.0; 50], 4), Err(TestError::ZeroVariance));
        assert!(matches!(adf_test(&[1.0, 2.0, 3.0], 4), Err(TestError::TooShort { .. })));
    }

    #[test]
    fn kruskal_examples() {
        let same = vec![vec![1.0, 2.0, 3.0]; 3];
        let r = kruskal_wallis(&same).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);

        let r = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![101.0, 102.0, 103.0]]).unwrap();
        // ranks 1..3 and 4..6: H = 12/42 * (36/3 + 225/3) - 21 = 27/7
        assert!((r.statistic - 27.0 / 7.0).abs() < 1e-12);
        assert!((r.p_value - 0.049534613435626).abs() < 1e-9);
        assert_eq!(r.df, 1);

        assert_eq!(kruskal_wallis(&[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![]]), Err(TestError::TooFewGroups));
    }

    #[test]
    fn kruskal_matches_tie_corrected_reference() {
        // scipy.stats.kruskal([1,1,2,3],[2,3,3,4],[5,5,6]) -> H=7.61737089201878, p=0.0221773
        let r = kruskal_wallis(&[vec![1.0, 1.0, 2.0, 3.0], vec![2.0, 3.0, 3.0, 4.0], vec![5.0, 5.0, 6.0]]).unwrap();
        assert!((r.statistic - 7.61737089201878).abs() < 1e-9, "{}", r.statistic);
    }

    #[test]
    fn levene_examples() {
        let r = levene_test(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(levene_test(&[vec![1.0], vec![1.0, 2.0]]), Err(TestError::SmallGroup(0, 2)));
        // scipy.stats.levene([1,2,3,4],[1,3,5,9], center="mean") -> W=2.4545454545, p=0.1682275
        let r = levene_test(&[vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 3.0, 5.0, 9.0]]).unwrap();
        assert!((r.statistic - 2.4545454545454546).abs() < 1e-9, "{}", r.statistic);
        assert!((r.p_value - 0.16822747484894715).abs() < 1e-8);
    }

    #[test]
    fn tail_quantile_picks_worst_regime() {
        use chrono::Duration;
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let vals: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { -0.2 + 0.02 * i as f64 } else { 0.1 }).collect();
        let dates: Vec<NaiveDate> = (0..20).map(|i| start + Duration::days(7 * i)).collect();
        let s = WeeklySeries::new("r", dates.clone(), vals.clone()).unwrap();
        let labels: Vec<_> =
            dates.iter().enumerate().map(|(i, d)| (*d, if i % 2 == 0 { Regime::Hawkish } else { Regime::Dovish })).collect();
        let out = regime_distribution_tests(&s, &labels).unwrap();
        let evens: Vec<f64> = vals.iter().step_by(2).copied().collect();
        assert_eq!(out.tail_regime, Regime::Hawkish);
        // 10 evenly spaced points from -0.2 step 0.04: h = 0.45 -> -0.2 + 0.45*0.04
        assert!((out.max_tail_q5 - (-0.2 + 0.45 * 0.04)).abs() < 1e-12);
        assert_eq!(out.max_tail_q5, percentile(&evens, 0.05));

        let one: Vec<_> = dates.iter().map(|d| (*d, Regime::Flat)).collect();
        assert!(matches!(regime_distribution_tests(&s, &one), Err(TestError::TooFewGroups)));
    }
}
