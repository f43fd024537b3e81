//! ARIMA(p,d,q) by conditional Gaussian likelihood and AIC order search.

use serde::Serialize;

use super::BaselineError;
use crate::linalg::ols;
use crate::nelder_mead::{minimize, NmOptions};

/// Largest admissible partial autocorrelation magnitude after fitting.
const PACF_MARGIN: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// `d = 0` models carry a mean term.
    pub fn has_intercept(&self) -> bool {
        self.d == 0
    }

    fn validate(&self) -> Result<(), BaselineError> {
        if self.p > 5 || self.q > 5 || self.d > 2 {
            return Err(BaselineError::BadOrder(*self));
        }
        // (0,0,0) is admitted only as the mean-plus-noise model
        Ok(())
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    /// Mean of the differenced series; `None` when `d > 0`.
    pub intercept: Option<f64>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sigma2: f64,
    pub loglik: f64,
    pub aic: f64,
    /// Residuals entering the likelihood.
    pub nobs: usize,
    /// Differenced-series index where the likelihood starts.
    pub condition: usize,
    pub residuals: Vec<f64>,
    pub optimizer_iterations: usize,
}

pub fn difference(x: &[f64], d: usize) -> Vec<f64> {
    let mut w = x.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Maps partial autocorrelations in (-1,1) to stationary AR coefficients.
pub fn pacf_to_ar(r: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - rk * prev[k - 1 - j];
        }
        phi.push(rk);
    }
    phi
}

/// Inverse of `pacf_to_ar`; `None` when the coefficients are not stationary.
pub fn ar_to_pacf(phi: &[f64]) -> Option<Vec<f64>> {
    let p = phi.len();
    let mut cur = phi.to_vec();
    let mut r = vec![0.0; p];
    for k in (0..p).rev() {
        let rk = cur[k];
        if !(rk.abs() < 1.0) {
            return None;
        }
        r[k] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

fn css_residuals(w: &[f64], mu: f64, ar: &[f64], ma: &[f64], start: usize, e: &mut [f64]) -> f64 {
    let mut ssr = 0.0;
    for t in 0..w.len() {
        if t < start {
            e[t] = 0.0;
            continue;
        }
        let mut pred = mu;
        for (i, a) in ar.iter().enumerate() {
            pred += a * (w[t - 1 - i] - mu);
        }
        for (j, m) in ma.iter().enumerate() {
            if t > j {
                pred += m * e[t - 1 - j];
            }
        }
        e[t] = w[t] - pred;
        ssr += e[t] * e[t];
    }
    ssr
}

struct Layout {
    p: usize,
    q: usize,
    intercept: bool,
    mean: f64,
    scale: f64,
}

impl Layout {
    fn unpack(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let r_ar: Vec<f64> = x[..self.p].iter().map(|v| v.tanh()).collect();
        let r_ma: Vec<f64> = x[self.p..self.p + self.q].iter().map(|v| v.tanh()).collect();
        let ar = pacf_to_ar(&r_ar);
        // 1 + sum theta z^j is invertible when -theta is a stationary AR polynomial
        let ma: Vec<f64> = pacf_to_ar(&r_ma).iter().map(|v| -v).collect();
        let mu = if self.intercept { self.mean + x[self.p + self.q] * self.scale } else { 0.0 };
        let mut r = r_ar;
        r.extend(r_ma);
        (mu, ar, ma, r)
    }
}

/// Hannan-Rissanen style start: long autoregression for innovations, then
/// OLS on lagged values and lagged innovations.
fn start_values(w: &[f64], mean: f64, p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let c: Vec<f64> = w.iter().map(|v| v - mean).collect();
    let lag_ols = |cols: &dyn Fn(usize) -> Vec<f64>, from: usize, k: usize| -> Option<Vec<f64>> {
        if n <= from + k + 2 {
            return None;
        }
        let mut rows = Vec::with_capacity((n - from) * k);
        for t in from..n {
            rows.extend(cols(t));
        }
        ols(&rows, k, &c[from..]).ok().map(|f| f.coef)
    };
    if p + q == 0 {
        return (vec![], vec![]);
    }
    let innovations = if q > 0 {
        let m = (p.max(q) + 5).min(n / 5).max(1);
        let Some(long) = lag_ols(&|t| (1..=m).map(|i| c[t - i]).collect(), m, m) else {
            return (vec![0.0; p], vec![0.0; q]);
        };
        let mut e = vec![0.0; n];
        for t in m..n {
            e[t] = c[t] - (1..=m).map(|i| long[i - 1] * c[t - i]).sum::<f64>();
        }
        e
    } else {
        vec![0.0; n]
    };
    let from = if q > 0 { (p.max(q) + 5).min(n / 5).max(1) + q } else { p };
    let coef = lag_ols(&|t| (1..=p).map(|i| c[t - i]).chain((1..=q).map(|j| innovations[t - j])).collect(), from, p + q);
    match coef {
        Some(b) => (b[..p].to_vec(), b[p..].to_vec()),
        None => (vec![0.0; p], vec![0.0; q]),
    }
}

fn to_unconstrained(coef: &[f64], negate: bool) -> Vec<f64> {
    let mut c: Vec<f64> = coef.iter().map(|v| if negate { -v } else { *v }).collect();
    for _ in 0..20 {
        if let Some(r) = ar_to_pacf(&c) {
            if r.iter().all(|v| v.abs() < 0.98) {
                return r.iter().map(|v| v.atanh()).collect();
            }
        }
        c.iter_mut().for_each(|v| *v *= 0.7);
    }
    vec![0.0; coef.len()]
}

/// Fits with the likelihood starting at differenced index `condition`
/// (at least `p`).
pub fn fit_arima_conditioned(s: &[f64], order: ArimaOrder, condition: usize) -> Result<ArimaFit, BaselineError> {
    order.validate()?;
    let ArimaOrder { p, d, q } = order;
    if let Some(i) = s.iter().position(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite(i));
    }
    let need = 10 * (p + q + 1);
    if s.len() < need.max(d + 3) {
        return Err(BaselineError::TooShort { need, got: s.len() });
    }
    let w = difference(s, d);
    let start = condition.max(p);
    let m = w.len().saturating_sub(start);
    if m < p + q + 2 {
        return Err(BaselineError::TooShort { need: start + p + q + 2, got: w.len() });
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let layout = Layout { p, q, intercept: order.has_intercept(), mean, scale };

    let (ar0, ma0) = start_values(&w, mean, p, q);
    let mut x0 = to_unconstrained(&ar0, false);
    x0.extend(to_unconstrained(&ma0, true));
    if layout.intercept {
        x0.push(0.0);
    }
    let mut e = vec![0.0; w.len()];
    let norm = m as f64 * scale * scale;
    let mut objective = |x: &[f64]| {
        let (mu, ar, ma, _) = layout.unpack(x);
        css_residuals(&w, mu, &ar, &ma, start, &mut e) / norm
    };
    let opts = NmOptions { max_iter: 4000, f_tol: 1e-13, x_tol: 1e-8, initial_step: 0.2 };
    let mut res = minimize(&mut objective, &x0, &opts);
    let mut iterations = res.iterations;
    // restart from the optimum until it stops moving
    for _ in 0..3 {
        if !res.converged {
            break;
        }
        let again = minimize(&mut objective, &res.x, &NmOptions { initial_step: 0.05, ..opts });
        iterations += again.iterations;
        let improved = again.f < res.f - 1e-14;
        if again.f <= res.f {
            res = again;
        }
        if !improved {
            break;
        }
    }
    if !res.converged {
        let tail = res.trace.iter().rev().take(5).rev().copied().collect();
        return Err(BaselineError::NoConvergence { order, iterations, trace_tail: tail });
    }
    let (mu, ar, ma, r) = layout.unpack(&res.x);
    if r.iter().any(|v| v.abs() > PACF_MARGIN) {
        return Err(BaselineError::NearUnitRoot(order));
    }
    let mut residuals = vec![0.0; w.len()];
    let ssr = css_residuals(&w, mu, &ar, &ma, start, &mut residuals);
    let sigma2 = ssr / m as f64;
    if !(sigma2 > 0.0) {
        return Err(BaselineError::PerfectFit(order));
    }
    let loglik = -0.5 * m as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    let k = p + q + 1 + layout.intercept as usize;
    Ok(ArimaFit {
        order,
        intercept: layout.intercept.then_some(mu),
        ar,
        ma,
        sigma2,
        loglik,
        aic: 2.0 * k as f64 - 2.0 * loglik,
        nobs: m,
        condition: start,
        residuals: residuals[start..].to_vec(),
        optimizer_iterations: iterations,
    })
}

/// Fits with the likelihood conditioned on the first `p` differenced values.
pub fn fit_arima(s: &[f64], order: ArimaOrder) -> Result<ArimaFit, BaselineError> {
    fit_arima_conditioned(s, order, order.p)
}

/// One-step-ahead forecasts of `s[t]` for `t in from..s.len()`, each using
/// only `s[..t]` and the fitted parameters.
pub fn forecast_one_step(fit: &ArimaFit, s: &[f64], from: usize) -> Vec<f64> {
    let d = fit.order.d;
    let w = difference(s, d);
    let mu = fit.intercept.unwrap_or(0.0);
    let start = fit.order.p;
    let mut e = vec![0.0; w.len()];
    let mut w_hat = vec![mu; w.len()];
    for t in 0..w.len() {
        let mut pred = mu;
        if t >= start {
            for (i, a) in fit.ar.iter().enumerate() {
                pred += a * (w[t - 1 - i] - mu);
            }
            for (j, m) in fit.ma.iter().enumerate() {
                if t > j {
                    pred += m * e[t - 1 - j];
                }
            }
            e[t] = w[t] - pred;
        }
        w_hat[t] = pred;
    }
    // undo differencing with known past levels: s_t = w_t - sum_{k=1..d} C(d,k) (-1)^k s_{t-k}
    let binom = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
    (from.max(d)..s.len())
        .map(|t| {
            let mut v = w_hat[t - d];
            for k in 1..=d {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                v += sign * binom(d, k) * s[t - k];
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateRecord {
    pub order: ArimaOrder,
    pub aic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArimaSelection {
    pub fit: ArimaFit,
    pub candidates: Vec<CandidateRecord>,
}

/// Exhaustive AIC search over `p <= pmax`, `d <= dmax`, `q <= qmax`, all
/// candidates scored on the same stretch of the original series. Ties go
/// to the smaller `p + q`, then the smaller `p`.
pub fn select_arima_aic(s: &[f64], pmax: usize, dmax: usize, qmax: usize) -> Result<ArimaSelection, BaselineError> {
    let mut candidates = Vec::new();
    let mut best: Option<ArimaFit> = None;
    for d in 0..=dmax {
        for p in 0..=pmax {
            for q in 0..=qmax {
                let order = ArimaOrder::new(p, d, q);
                match fit_arima_conditioned(s, order, pmax + dmax - d) {
                    Ok(fit) => {
                        candidates.push(CandidateRecord { order, aic: Some(fit.aic), error: None });
                        let better = match &best {
                            None => true,
                            Some(b) => {
                                let key = |f: &ArimaFit| (f.order.p + f.order.q, f.order.p, f.order.d);
                                fit.aic < b.aic || (fit.aic == b.aic && key(&fit) < key(b))
                            }
                        };
                        if better {
                            best = Some(fit);
                        }
                    }
                    Err(e) => candidates.push(CandidateRecord { order, aic: None, error: Some(e.to_string()) }),
                }
            }
        }
    }
    match best {
        Some(fit) => Ok(ArimaSelection { fit, candidates }),
        None => Err(BaselineError::AllCandidatesFailed(candidates.len())),
    }
}
