//! Variational mode decomposition (ADMM in the half spectrum) and the
//! IMF-level Granger scan.

use std::io::Write;

use chrono::NaiveDate;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causality::granger_ftest;
use crate::series::{align_contiguous, WeeklySeries};
use crate::stat_tests::{adf_test, schwert_max_lag};

type C64 = Complex<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VmdError {
    #[error("signal too short: need at least 16 samples, got {0}")]
    TooShort(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("K = {k} exceeds length/4 = {max}")]
    TooManyModes { k: usize, max: usize },
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaInit {
    /// `omega_k = 0.5 k / K`.
    Uniform,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmdConfig {
    pub k: usize,
    pub alpha: f64,
    pub tau: f64,
    pub dc: bool,
    pub init: OmegaInit,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for VmdConfig {
    fn default() -> Self {
        Self { k: 3, alpha: 2000.0, tau: 0.0, dc: false, init: OmegaInit::Uniform, tol: 1e-7, max_iter: 500 }
    }
}

impl VmdConfig {
    fn validate(&self) -> Result<(), VmdError> {
        if self.k == 0 {
            return Err(VmdError::BadConfig("K must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(VmdError::BadConfig("alpha must be positive"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(VmdError::BadConfig("tau must be nonnegative"));
        }
        if !(self.tol > 0.0) {
            return Err(VmdError::BadConfig("tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(VmdError::BadConfig("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VmdResult {
    /// IMF_1..IMF_K, ascending center frequency.
    pub modes: Vec<Vec<f64>>,
    /// Center frequencies in cycles/sample.
    pub omegas: Vec<f64>,
    /// Spectral spread of each mode about its center frequency.
    pub bandwidths: Vec<f64>,
    pub iterations: usize,
    /// Last value of the relative update criterion.
    pub final_residual: f64,
    /// Constraint violation plus penalised bandwidth after each iteration.
    pub objective: Vec<f64>,
    pub config: VmdConfig,
}

fn mirror_extend(signal: &[f64]) -> Vec<C64> {
    let n = signal.len();
    let left = n / 2;
    let right = n - left;
    let mut out = Vec::with_capacity(2 * n);
    out.extend(signal[..left].iter().rev());
    out.extend(signal);
    out.extend(signal[n - right..].iter().rev());
    out.into_iter().map(|v| C64::new(v, 0.0)).collect()
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

fn objective(f: &[C64], u: &[Vec<C64>], omega: &[f64], freqs: &[f64], alpha: f64) -> f64 {
    let mut fit = 0.0;
    for j in 0..f.len() {
        let s: C64 = u.iter().map(|m| m[j]).sum();
        fit += (f[j] - s).norm_sqr();
    }
    let mut pen = 0.0;
    for (m, &w) in u.iter().zip(omega) {
        pen += m.iter().zip(freqs).map(|(c, &fr)| (fr - w).powi(2) * c.norm_sqr()).sum::<f64>();
    }
    fit + 2.0 * alpha * pen
}

pub fn vmd_decompose(signal: &[f64], cfg: &VmdConfig) -> Result<VmdResult, VmdError> {
    cfg.validate()?;
    let n = signal.len();
    if n < 16 {
        return Err(VmdError::TooShort(n));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(VmdError::NonFinite(i));
    }
    if cfg.k > n / 4 {
        return Err(VmdError::TooManyModes { k: cfg.k, max: n / 4 });
    }
    let t_len = 2 * n;
    let mut planner = FftPlanner::<f64>::new();
    let mut spectrum = mirror_extend(signal);
    planner.plan_fft_forward(t_len).process(&mut spectrum);

    // bins 0..=n cover frequencies 0..=0.5
    let half = n + 1;
    let f: Vec<C64> = spectrum[..half].to_vec();
    let freqs: Vec<f64> = (0..half).map(|j| j as f64 / t_len as f64).collect();
    let k = cfg.k;
    let mut u = vec![vec![C64::new(0.0, 0.0); half]; k];
    let mut omega: Vec<f64> = match cfg.init {
        OmegaInit::Uniform => (0..k).map(|i| 0.5 * i as f64 / k as f64).collect(),
        OmegaInit::Zero => vec![0.0; k],
    };
    if cfg.dc {
        omega[0] = 0.0;
    }
    let mut lambda = vec![C64::new(0.0, 0.0); half];
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let two_alpha = 2.0 * cfg.alpha;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut total: Vec<C64> = (0..half).map(|j| u.iter().map(|m| m[j]).sum()).collect();
        let mut crit = 0.0;
        for m in 0..k {
            let old_norm = norm_sqr(&u[m]);
            let mut diff = 0.0;
            let wk = omega[m];
            for j in 0..half {
                let others = total[j] - u[m][j];
                let new = (f[j] - others + lambda[j] * 0.5) / (1.0 + two_alpha * (freqs[j] - wk).powi(2));
                diff += (new - u[m][j]).norm_sqr();
                u[m][j] = new;
                total[j] = others + new;
            }
            crit += if old_norm > 0.0 {
                diff / old_norm
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if !(cfg.dc && m == 0) {
                let energy = norm_sqr(&u[m]);
                if energy > 0.0 {
                    omega[m] = u[m].iter().zip(&freqs).map(|(c, &fr)| fr * c.norm_sqr()).sum::<f64>() / energy;
                }
            }
        }
        if cfg.tau > 0.0 {
            for j in 0..half {
                lambda[j] += (f[j] - total[j]) * cfg.tau;
            }
        }
        trace.push(objective(&f, &u, &omega, &freqs, cfg.alpha));
        residual = crit;
        if crit < cfg.tol {
            break;
        }
    }

    let bandwidths: Vec<f64> = u
        .iter()
        .zip(&omega)
        .map(|(m, &w)| {
            let e = norm_sqr(m);
            if e > 0.0 {
                (m.iter().zip(&freqs).map(|(c, &fr)| (fr - w).powi(2) * c.norm_sqr()).sum::<f64>() / e).sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let inverse = planner.plan_fft_inverse(t_len);
    let left = n / 2;
    let modes_unsorted: Vec<Vec<f64>> = u
        .iter()
        .map(|m| {
            let mut full = vec![C64::new(0.0, 0.0); t_len];
            full[0] = C64::new(m[0].re, 0.0);
            full[n] = C64::new(m[n].re, 0.0);
            for j in 1..n {
                full[j] = m[j];
                full[t_len - j] = m[j].conj();
            }
            inverse.process(&mut full);
            full[left..left + n].iter().map(|c| c.re / t_len as f64).collect()
        })
        .collect();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]).then(a.cmp(&b)));
    Ok(VmdResult {
        modes: order.iter().map(|&i| modes_unsorted[i].clone()).collect(),
        omegas: order.iter().map(|&i| omega[i]).collect(),
        bandwidths: order.iter().map(|&i| bandwidths[i]).collect(),
        iterations,
        final_residual: residual,
        objective: trace,
        config: cfg.clone(),
    })
}

/// Pointwise sum of the modes.
pub fn vmd_reconstruct(r: &VmdResult) -> Vec<f64> {
    let n = r.modes.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for m in &r.modes {
        for (o, v) in out.iter_mut().zip(m) {
            *o += v;
        }
    }
    out
}

/// CSV with columns `date, imf1..imfK`.
pub fn write_imf_csv<W: Write>(writer: W, dates: &[NaiveDate], r: &VmdResult) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend((1..=r.modes.len()).map(|i| format!("imf{i}")));
    w.write_record(&header)?;
    for (t, d) in dates.iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend(r.modes.iter().map(|m| format!("{}", m[t])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Stationarity handling applied to one IMF before testing.
#[derive(Debug, Clone, Serialize)]
pub struct ImfPrep {
    pub series: String,
    pub imf: usize,
    pub adf_p: Option<f64>,
    pub differenced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanHit {
    pub predictor: String,
    pub predictor_imf: usize,
    pub target_imf: usize,
    pub lag: usize,
    pub f_stat: f64,
    pub p_value: f64,
}

impl ScanHit {
    /// `Name(j,p)` label.
    pub fn label(&self) -> String {
        format!("{}({},{})", self.predictor, self.predictor_imf, self.lag)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanFailure {
    pub predictor: String,
    pub predictor_imf: Option<usize>,
    pub target_imf: Option<usize>,
    pub lag: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub target: String,
    pub config: VmdConfig,
    pub max_lag: usize,
    pub alpha_level: f64,
    pub tested: usize,
    pub hits: Vec<ScanHit>,
    pub failures: Vec<ScanFailure>,
    pub prep: Vec<ImfPrep>,
}

/// ADF with Schwert's lag cap; differenced once unless the unit root is
/// rejected at 5%.
pub fn stationarize(x: &[f64]) -> (Vec<f64>, Option<f64>, bool) {
    let p = adf_test(x, schwert_max_lag(x.len())).ok().map(|r| r.p_value);
    match p {
        Some(p) if p < 0.05 => (x.to_vec(), Some(p), false),
        _ => (x.windows(2).map(|w| w[1] - w[0]).collect(), p, true),
    }
}

/// Tests every (predictor IMF, target IMF, lag) cell on already stationary
/// IMFs; series of unequal length are aligned on their last samples.
pub fn scan_imfs(
    predictor: &str,
    target_imfs: &[Vec<f64>],
    predictor_imfs: &[Vec<f64>],
    max_lag: usize,
    alpha_level: f64,
) -> (usize, Vec<ScanHit>, Vec<ScanFailure>) {
    let mut tested = 0;
    let mut hits = Vec::new();
    let mut failures = Vec::new();
    for (i, y) in target_imfs.iter().enumerate() {
        for (j, x) in predictor_imfs.iter().enumerate() {
            let len = y.len().min(x.len());
            let (y, x) = (&y[y.len() - len..], &x[x.len() - len..]);
            for lag in 1..=max_lag {
                tested += 1;
                match granger_ftest(y, x, lag) {
                    Ok(r) if r.p_value < alpha_level => hits.push(ScanHit {
                        predictor: predictor.to_string(),
                        predictor_imf: j + 1,
                        target_imf: i + 1,
                        lag,
                        f_stat: r.f_stat,
                        p_value: r.p_value,
                    }),
                    Ok(_) => {}
                    Err(e) => failures.push(ScanFailure {
                        predictor: predictor.to_string(),
                        predictor_imf: Some(j + 1),
                        target_imf: Some(i + 1),
                        lag: Some(lag),
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    (tested, hits, failures)
}

fn prepared_imfs(name: &str, values: &[f64], cfg: &VmdConfig, prep: &mut Vec<ImfPrep>) -> Result<Vec<Vec<f64>>, VmdError> {
    let r = vmd_decompose(values, cfg)?;
    Ok(r.modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (x, adf_p, differenced) = stationarize(m);
            prep.push(ImfPrep { series: name.to_string(), imf: i + 1, adf_p, differenced });
            x
        })
        .collect())
}

/// Decomposes the target and each predictor on their common contiguous
/// sample and reports significant IMF-level Granger cells, sorted by
/// target IMF, then predictor (input order), predictor IMF and lag.
pub fn vmd_granger_scan(
    target: &WeeklySeries,
    predictors: &[WeeklySeries],
    cfg: &VmdConfig,
    max_lag: usize,
    alpha_level: f64,
) -> ScanReport {
    let mut report = ScanReport {
        target: target.name().to_string(),
        config: cfg.clone(),
        max_lag,
        alpha_level,
        tested: 0,
        hits: Vec::new(),
        failures: Vec::new(),
        prep: Vec::new(),
    };
    // target IMFs keyed by the sample they were computed on
    let mut cache: Vec<((NaiveDate, usize), Vec<Vec<f64>>)> = Vec::new();
    let mut ranked = Vec::new();
    for (rank, pred) in predictors.iter().enumerate() {
        let (dates, cols) = align_contiguous(&[target, pred]);
        let fail =
            |reason: String| ScanFailure { predictor: pred.name().to_string(), predictor_imf: None, target_imf: None, lag: None, reason };
        let Some(&start) = dates.first() else {
            report.failures.push(fail("no common sample".into()));
            continue;
        };
        let key = (start, dates.len());
        let target_imfs = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, imfs)) => imfs.clone(),
            None => match prepared_imfs(target.name(), &cols[0], cfg, &mut report.prep) {
                Ok(imfs) => {
                    cache.push((key, imfs.clone()));
                    imfs
                }
                Err(e) => {
                    report.failures.push(fail(format!("target decomposition: {e}")));
                    continue;
                }
            },
        };
        let pred_imfs = match prepared_imfs(pred.name(), &cols[1], cfg, &mut report.prep) {
            Ok(imfs) => imfs,
            Err(e) => {
                report.failures.push(fail(format!("decomposition: {e}")));
                continue;
            }
        };
        let (tested, hits, failures) = scan_imfs(pred.name(), &target_imfs, &pred_imfs, max_lag, alpha_level);
        report.tested += tested;
        ranked.extend(hits.into_iter().map(|h| (rank, h)));
        report.failures.extend(failures);
    }
    ranked.sort_by(|(ra, a), (rb, b)| (a.target_imf, ra, a.predictor_imf, a.lag).cmp(&(b.target_imf, rb, b.predictor_imf, b.lag)));
    report.hits = ranked.into_iter().map(|(_, h)| h).collect();
    report
}

impl ScanReport {
    /// Columns `target_imf, predictor, f_stat, p_value`, predictor labelled
    /// `Name(j,p)`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["target_imf", "predictor", "f_stat", "p_value"])?;
        for h in &self.hits {
            w.write_record([format!("IMF{}", h.target_imf), h.label(), format!("{:.3}", h.f_stat), format!("{:.4}", h.p_value)])?;
        }
        w.flush()?;
        Ok(())
    }
}
