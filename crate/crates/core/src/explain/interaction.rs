//! Regime-conditional regression of a feature's attribution on its value.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::aggregate::mean_sd;
use super::{AttributionTensor, ExplainError};
use crate::dist::t_two_sided;
use crate::linalg::fit_line;
use crate::messages::Regime;

/// Slopes are shown only below this p-value.
pub const DISPLAY_P: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSlope {
    /// `None` pools every sample.
    pub regime: Option<Regime>,
    pub slope: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub n: usize,
    pub display: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedRegime {
    pub regime: Option<Regime>,
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFits {
    pub slopes: Vec<RegimeSlope>,
    pub omitted: Vec<OmittedRegime>,
}

fn fit(regime: Option<Regime>, x: &[f64], y: &[f64]) -> Result<RegimeSlope, OmittedRegime> {
    let omit = |reason: &str| OmittedRegime { regime, n: x.len(), reason: reason.into() };
    if x.len() < 3 {
        return Err(omit("fewer than 3 points"));
    }
    let line = fit_line(x, y).ok_or_else(|| omit("feature value is constant"))?;
    let p_value = if line.slope_se > 0.0 {
        t_two_sided(line.slope / line.slope_se, (line.n - 2) as f64)
    } else if line.slope != 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(RegimeSlope { regime, slope: line.slope, intercept: line.intercept, p_value, n: line.n, display: p_value < DISPLAY_P })
}

/// OLS of `phi` on `value` within each rate regime and over all samples.
/// Samples without a regime enter only the pooled fit.
pub fn interaction_by_regime(value: &[f64], phi: &[f64], regimes: &[Option<Regime>]) -> Result<RegimeFits, ExplainError> {
    if value.len() != phi.len() || value.len() != regimes.len() {
        return Err(ExplainError::Shape(format!("{} values, {} attributions, {} regimes", value.len(), phi.len(), regimes.len())));
    }
    if value.iter().chain(phi).any(|v| !v.is_finite()) {
        return Err(ExplainError::NonFinite);
    }
    let mut out = RegimeFits { slopes: Vec::new(), omitted: Vec::new() };
    let groups = Regime::RATE.iter().map(|&r| Some(r)).chain([None]);
    for g in groups {
        let (x, y): (Vec<f64>, Vec<f64>) = (0..value.len()).filter(|&i| g.is_none() || regimes[i] == g).map(|i| (value[i], phi[i])).unzip();
        match fit(g, &x, &y) {
            Ok(s) => out.slopes.push(s),
            Err(o) => out.omitted.push(o),
        }
    }
    Ok(out)
}

/// Run-averaged attribution of one feature at one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPoint {
    pub fold: usize,
    pub date: NaiveDate,
    /// Value of the feature in the last window row, in original units.
    pub value: f64,
    pub regime: Option<Regime>,
    /// Attribution summed over lags, averaged over runs.
    pub phi_mean: f64,
    /// Population sd across runs.
    pub phi_sd: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionScope {
    /// Fold id, or `None` for all folds together.
    pub fold: Option<usize>,
    pub fits: RegimeFits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionResult {
    pub feature: String,
    pub points: Vec<InteractionPoint>,
    pub scopes: Vec<InteractionScope>,
}

/// Collects per-date points for `feature` and fits each fold and the pooled
/// sample. `value_at` gives the raw feature value at a window's last date,
/// `regime_at` the rate regime of that date.
pub fn interaction_analysis(
    t: &AttributionTensor,
    feature: &str,
    value_at: impl Fn(NaiveDate) -> Option<f64>,
    regime_at: impl Fn(NaiveDate) -> Option<Regime>,
) -> Result<InteractionResult, ExplainError> {
    let f = t.feature_names.iter().position(|n| n == feature).ok_or_else(|| ExplainError::UnknownFeature(feature.into()))?;
    let n = t.feature_names.len();
    let mut by_point: BTreeMap<(usize, NaiveDate), (NaiveDate, Vec<f64>)> = BTreeMap::new();
    for s in t.sorted_samples() {
        let total: f64 = s.phi.iter().skip(f).step_by(n).sum();
        by_point.entry((s.fold, s.date)).or_insert((s.window_end, Vec::new())).1.push(total);
    }
    let mut points = Vec::with_capacity(by_point.len());
    for ((fold, date), (end, phis)) in by_point {
        let value = value_at(end).ok_or_else(|| ExplainError::Shape(format!("no {feature} value at {end}")))?;
        let (phi_mean, phi_sd) = mean_sd(&phis);
        points.push(InteractionPoint { fold, date, value, regime: regime_at(end), phi_mean, phi_sd, runs: phis.len() });
    }
    let mut folds: Vec<Option<usize>> = points.iter().map(|p| Some(p.fold)).collect();
    folds.dedup();
    folds.push(None);
    let mut scopes = Vec::with_capacity(folds.len());
    for fold in folds {
        let sel: Vec<&InteractionPoint> = points.iter().filter(|p| fold.is_none_or(|f| p.fold == f)).collect();
        let x: Vec<f64> = sel.iter().map(|p| p.value).collect();
        let y: Vec<f64> = sel.iter().map(|p| p.phi_mean).collect();
        let r: Vec<Option<Regime>> = sel.iter().map(|p| p.regime).collect();
        scopes.push(InteractionScope { fold, fits: interaction_by_regime(&x, &y, &r)? });
    }
    Ok(InteractionResult { feature: feature.into(), points, scopes })
}

impl InteractionResult {
    /// One row per scope and regime, fitted or omitted.
    pub fn write_slopes_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scope", "regime", "n", "slope", "intercept", "p_value", "display", "note"])?;
        let regime_name = |r: Option<Regime>| r.map_or("All", |r| r.name()).to_string();
        for s in &self.scopes {
            let scope = s.fold.map_or("Global".to_string(), |f| format!("Fold {f}"));
            for r in &s.fits.slopes {
                w.write_record([
                    scope.clone(),
                    regime_name(r.regime),
                    r.n.to_string(),
                    format!("{:.6}", r.slope),
                    format!("{:.6}", r.intercept),
                    format!("{:.6}", r.p_value),
                    r.display.to_string(),
                    String::new(),
                ])?;
            }
            for o in &s.fits.omitted {
                w.write_record([
                    scope.clone(),
                    regime_name(o.regime),
                    o.n.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    "false".into(),
                    o.reason.clone(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_points_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fold", "date", "value", "regime", "phi_mean", "phi_sd", "runs"])?;
        for p in &self.points {
            w.write_record([
                p.fold.to_string(),
                p.date.to_string(),
                p.value.to_string(),
                p.regime.map_or(String::new(), |r| r.name().to_string()),
                p.phi_mean.to_string(),
                p.phi_sd.to_string(),
                p.runs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
