//! Mean-absolute attribution tables: per feature, per (feature, lag) and
//! lag profiles.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AttributionTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Mean |phi| over samples and lags per feature.
    Global,
    /// Mean |phi| over samples per (feature, lag).
    FeatureLag,
    /// Mean |phi| per lag for each feature, spread taken across folds.
    TemporalProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldCell {
    pub fold: usize,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub rank: usize,
    pub feature: String,
    /// Weeks before the last window row; 0 is the most recent.
    pub lag: Option<usize>,
    pub mean: f64,
    pub sd: f64,
    pub folds: Vec<FoldCell>,
}

impl ImportanceRow {
    pub fn label(&self) -> String {
        match self.lag {
            None => self.feature.clone(),
            Some(0) => format!("{} (t)", self.feature),
            Some(l) => format!("{} (t-{l})", self.feature),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable {
    pub mode: AggregateMode,
    pub folds: Vec<usize>,
    pub rows: Vec<ImportanceRow>,
}

pub(crate) fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    if v.iter().all(|x| *x == v[0]) {
        return (v[0], 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

type Key = (usize, Option<usize>);

/// Mean |phi| per (fold, run) for each key.
fn unit_means(t: &AttributionTensor, by_lag: bool) -> BTreeMap<Key, BTreeMap<(usize, usize), f64>> {
    let n = t.feature_names.len();
    let mut sums: BTreeMap<Key, BTreeMap<(usize, usize), (f64, usize)>> = BTreeMap::new();
    for s in t.sorted_samples() {
        let l = s.lookback;
        for (cell, phi) in s.phi.iter().enumerate() {
            let (row, feature) = (cell / n, cell % n);
            let key = (feature, by_lag.then_some(l - 1 - row));
            let e = sums.entry(key).or_default().entry((s.fold, s.run)).or_insert((0.0, 0));
            e.0 += phi.abs();
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(k, units)| (k, units.into_iter().map(|(u, (s, c))| (u, s / c as f64)).collect())).collect()
}

fn rank(rows: &mut [ImportanceRow], order: impl Fn(&ImportanceRow) -> (usize, usize)) {
    rows.sort_by(|a, b| b.mean.total_cmp(&a.mean).then(order(a).cmp(&order(b))));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

/// Ranked importance table. Samples are read in (fold, run, date) order,
/// so the result does not depend on how the tensor is ordered.
pub fn aggregate_attributions(t: &AttributionTensor, mode: AggregateMode) -> ImportanceTable {
    let folds: Vec<usize> = {
        let mut f: Vec<usize> = t.samples.iter().map(|s| s.fold).collect();
        f.sort_unstable();
        f.dedup();
        f
    };
    let name = |f: usize| t.feature_names[f].clone();
    let rows = match mode {
        AggregateMode::Global | AggregateMode::FeatureLag => {
            let mut rows: Vec<ImportanceRow> = unit_means(t, mode == AggregateMode::FeatureLag)
                .into_iter()
                .map(|((feature, lag), units)| {
                    let all: Vec<f64> = units.values().copied().collect();
                    let (mean, sd) = mean_sd(&all);
                    let cells = folds
                        .iter()
                        .filter_map(|&fold| {
                            let v: Vec<f64> = units.iter().filter(|((f, _), _)| *f == fold).map(|(_, v)| *v).collect();
                            (!v.is_empty()).then(|| {
                                let (mean, sd) = mean_sd(&v);
                                FoldCell { fold, mean, sd }
                            })
                        })
                        .collect();
                    ImportanceRow { rank: 0, feature: name(feature), lag, mean, sd, folds: cells }
                })
                .collect();
            let index = |r: &ImportanceRow| t.feature_names.iter().position(|n| *n == r.feature).unwrap_or(usize::MAX);
            rank(&mut rows, |r| (index(r), r.lag.unwrap_or(0)));
            rows
        }
        AggregateMode::TemporalProfile => {
            let global = aggregate_attributions(t, AggregateMode::Global);
            let by_lag = unit_means(t, true);
            let mut rows = Vec::new();
            for g in &global.rows {
                let feature = t.feature_names.iter().position(|n| *n == g.feature).expect("known feature");
                for ((_, lag), units) in by_lag.range((feature, None)..=(feature, Some(usize::MAX))) {
                    let cells: Vec<FoldCell> = folds
                        .iter()
                        .filter_map(|&fold| {
                            let v: Vec<f64> = units.iter().filter(|((f, _), _)| *f == fold).map(|(_, v)| *v).collect();
                            (!v.is_empty()).then(|| {
                                let (mean, sd) = mean_sd(&v);
                                FoldCell { fold, mean, sd }
                            })
                        })
                        .collect();
                    let fold_means: Vec<f64> = cells.iter().map(|c| c.mean).collect();
                    let (mean, sd) = mean_sd(&fold_means);
                    rows.push(ImportanceRow { rank: g.rank, feature: g.feature.clone(), lag: *lag, mean, sd, folds: cells });
                }
            }
            rows
        }
    };
    ImportanceTable { mode, folds, rows }
}

impl ImportanceTable {
    /// Ranked rows with `mean (sd)` cells per fold. `limit` keeps the top rows.
    pub fn write_csv<W: Write>(&self, writer: W, limit: Option<usize>) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Variable".to_string()];
        if self.mode == AggregateMode::TemporalProfile {
            header.extend(["Lag".to_string(), "Feature rank".to_string()]);
        } else {
            header.push("Rank".to_string());
        }
        header.push("Average".to_string());
        header.extend(self.folds.iter().map(|f| format!("Fold {f}")));
        w.write_record(&header)?;
        let cell = |m: f64, s: f64| format!("{m:.4} ({s:.4})");
        for r in self.rows.iter().take(limit.unwrap_or(usize::MAX)) {
            let mut rec = Vec::with_capacity(header.len());
            if self.mode == AggregateMode::TemporalProfile {
                rec.push(r.feature.clone());
                rec.push(r.lag.map_or(String::new(), |l| l.to_string()));
            } else {
                rec.push(r.label());
            }
            rec.push(r.rank.to_string());
            rec.push(cell(r.mean, r.sd));
            for f in &self.folds {
                rec.push(r.folds.iter().find(|c| c.fold == *f).map_or(String::new(), |c| cell(c.mean, c.sd)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
