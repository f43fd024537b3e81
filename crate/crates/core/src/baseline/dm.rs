//! Diebold-Mariano test with the Harvey-Leybourne-Newbold correction.

use serde::Serialize;

use super::BaselineError;
use crate::dist::t_two_sided;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmResult {
    /// HLN-corrected statistic; negative when the first forecaster has the
    /// smaller squared errors.
    pub statistic: f64,
    pub p_value: f64,
    pub horizon: usize,
    pub loss: &'static str,
    pub n: usize,
}

/// Tests equal squared-error accuracy of two aligned error series.
pub fn diebold_mariano(e1: &[f64], e2: &[f64], h: usize) -> Result<DmResult, BaselineError> {
    if e1.len() != e2.len() {
        return Err(BaselineError::LengthMismatch(e1.len(), e2.len()));
    }
    let n = e1.len();
    if n < 10 {
        return Err(BaselineError::TooShort { need: 10, got: n });
    }
    if h == 0 || h >= n {
        return Err(BaselineError::BadHorizon(h));
    }
    if let Some(i) = e1.iter().chain(e2).position(|v| !v.is_finite()) {
        return Err(BaselineError::NonFinite(i % n));
    }
    let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a * a - b * b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let dev: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let autocov = |k: usize| dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / nf;
    let mut lrv = autocov(0);
    for k in 1..h {
        lrv += 2.0 * (1.0 - k as f64 / h as f64) * autocov(k);
    }
    if !(lrv > 0.0) {
        return Err(BaselineError::IndistinguishableForecasts);
    }
    let dm = mean / (lrv / nf).sqrt();
    let hf = h as f64;
    let statistic = dm * ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
    Ok(DmResult { statistic, p_value: t_two_sided(statistic, nf - 1.0), horizon: h, loss: "squared_error", n })
}
