//! Weekly index aggregation, regime labels and the announcement event study.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClassifiedMessage, Stance};
use crate::series::{friday_grid, week_ending_friday, WeeklySeries};

/// Dead band around zero separating the neutral regime.
pub const REGIME_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("no messages to aggregate")]
    NoMessages,
    #[error("no usable events ({dropped} dropped)")]
    NoUsableEvents { dropped: usize },
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
}

/// Weekly index plus per-week message counts and total engagement weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MpeSeries {
    pub series: WeeklySeries,
    pub counts: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Aggregates over the Friday grid spanning the messages.
pub fn build_mpe_weekly(classified: &[ClassifiedMessage]) -> Result<MpeSeries, IndexError> {
    let first = classified.iter().map(|c| c.message.date()).min().ok_or(IndexError::NoMessages)?;
    let last = classified.iter().map(|c| c.message.date()).max().ok_or(IndexError::NoMessages)?;
    build_mpe_weekly_on(classified, first, last)
}

/// Aggregates over an explicit span; messages outside it are ignored.
/// Week value is `sum(w * s) / sum(w)` with `w = 1 + likes + reshares`.
pub fn build_mpe_weekly_on(classified: &[ClassifiedMessage], from: NaiveDate, to: NaiveDate) -> Result<MpeSeries, IndexError> {
    if classified.is_empty() {
        return Err(IndexError::NoMessages);
    }
    let grid = friday_grid(from, to);
    let mut buckets: BTreeMap<NaiveDate, Vec<&ClassifiedMessage>> = BTreeMap::new();
    for c in classified {
        let week = week_ending_friday(c.message.date());
        if week >= grid[0] && week <= grid[grid.len() - 1] {
            buckets.entry(week).or_default().push(c);
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut counts = Vec::with_capacity(grid.len());
    let mut weights = Vec::with_capacity(grid.len());
    for week in &grid {
        match buckets.get_mut(week) {
            Some(msgs) => {
                // fixed summation order makes the result independent of arrival order
                msgs.sort_by(|a, b| a.message.id.cmp(&b.message.id));
                let (num, den) = msgs.iter().fold((0.0, 0.0), |(n, d), c| {
                    let w = c.message.weight();
                    (n + w * c.stance.value() as f64, d + w)
                });
                values.push(num / den);
                counts.push(msgs.len());
                weights.push(den);
            }
            None => {
                values.push(f64::NAN);
                counts.push(0);
                weights.push(0.0);
            }
        }
    }
    let series = WeeklySeries::new("MPE", grid, values)?;
    Ok(MpeSeries { series, counts, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Dovish,
    NeutralRegime,
    Hawkish,
    Falling,
    Flat,
    Rising,
}

impl Regime {
    pub const MPE: [Regime; 3] = [Regime::Dovish, Regime::NeutralRegime, Regime::Hawkish];
    pub const RATE: [Regime; 3] = [Regime::Falling, Regime::Flat, Regime::Rising];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Dovish => "Dovish",
            Regime::NeutralRegime => "Neutral",
            Regime::Hawkish => "Hawkish",
            Regime::Falling => "Falling",
            Regime::Flat => "Flat",
            Regime::Rising => "Rising",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::MPE, Self::RATE].concat().into_iter().find(|r| r.name() == s)
    }

    /// Label for an index level.
    pub fn of_level(v: f64) -> Self {
        if v > REGIME_THRESHOLD {
            Regime::Dovish
        } else if v < -REGIME_THRESHOLD {
            Regime::Hawkish
        } else {
            Regime::NeutralRegime
        }
    }

    /// Label for a rate change.
    pub fn of_change(d: f64) -> Self {
        if d > 0.0 {
            Regime::Rising
        } else if d < 0.0 {
            Regime::Falling
        } else {
            Regime::Flat
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeMode {
    /// Thresholds on levels.
    Mpe,
    /// Sign of the first difference; the first date gets no label.
    Rate,
}

/// Per-date regime labels; missing observations are skipped.
pub fn partition_regime(s: &WeeklySeries, mode: RegimeMode) -> Vec<(NaiveDate, Regime)> {
    match mode {
        RegimeMode::Mpe => s.present().map(|(d, v)| (d, Regime::of_level(v))).collect(),
        RegimeMode::Rate => (1..s.len())
            .filter_map(|i| {
                let (a, b) = (s.get(i - 1)?, s.get(i)?);
                Some((s.dates()[i], Regime::of_change(b - a)))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EventGroup {
    pub regime: Regime,
    pub events: Vec<NaiveDate>,
    /// Relative weeks `-h..=h`.
    pub offsets: Vec<i64>,
    pub mean: Vec<f64>,
    /// Population standard deviation across events.
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventStudy {
    pub half_window: usize,
    pub groups: Vec<EventGroup>,
    pub dropped: usize,
}

/// Average index path around announcement weeks, grouped by the
/// pre-announcement regime (mean over weeks `-5..=-1`).
pub fn event_study(mpe: &WeeklySeries, events: &[NaiveDate], half_window: usize) -> Result<EventStudy, IndexError> {
    let h = half_window as i64;
    let mut paths: BTreeMap<Regime, Vec<(NaiveDate, Vec<f64>)>> = BTreeMap::new();
    let mut dropped = 0;
    let mut seen = std::collections::BTreeSet::new();
    for ev in events {
        let week = week_ending_friday(*ev);
        if !seen.insert(week) {
            continue;
        }
        let path: Option<Vec<f64>> = (-h..=h).map(|k| mpe.value_at(week + Duration::days(7 * k))).collect();
        let Some(path) = path else {
            dropped += 1;
            continue;
        };
        let pre_len = 5.min(half_window).max(1);
        let pre = &path[(half_window - pre_len)..half_window];
        let pre_mean = if pre.is_empty() { path[half_window] } else { pre.iter().sum::<f64>() / pre.len() as f64 };
        paths.entry(Regime::of_level(pre_mean)).or_default().push((week, path));
    }
    if paths.is_empty() {
        return Err(IndexError::NoUsableEvents { dropped });
    }
    if dropped > 0 {
        log::warn!("event study dropped {dropped} event(s) without a full window");
    }
    let offsets: Vec<i64> = (-h..=h).collect();
    let groups = Regime::MPE
        .iter()
        .filter_map(|r| paths.get(r).map(|p| (r, p)))
        .map(|(r, p)| {
            let k = p.len() as f64;
            let mean: Vec<f64> = (0..offsets.len()).map(|j| p.iter().map(|(_, v)| v[j]).sum::<f64>() / k).collect();
            let sd = (0..offsets.len()).map(|j| (p.iter().map(|(_, v)| (v[j] - mean[j]).powi(2)).sum::<f64>() / k).sqrt()).collect();
            EventGroup { regime: *r, events: p.iter().map(|(d, _)| *d).collect(), offsets: offsets.clone(), mean, sd }
        })
        .collect();
    Ok(EventStudy { half_window, groups, dropped })
}

/// One row of the classified-corpus summary.
#[derive(Debug, Clone, Serialize)]
pub struct StanceRow {
    pub stance: Stance,
    pub count: usize,
    pub share_pct: f64,
    pub avg_likes: f64,
    pub avg_reshares: f64,
    /// Sum of mean likes and mean reshares.
    pub avg_engagement: f64,
}

pub fn stance_summary(classified: &[ClassifiedMessage]) -> Vec<StanceRow> {
    let total = classified.len().max(1) as f64;
    Stance::ALL
        .iter()
        .map(|s| {
            let group: Vec<_> = classified.iter().filter(|c| c.stance == *s).collect();
            let n = group.len();
            let mean = |f: &dyn Fn(&ClassifiedMessage) -> u64| {
                if n == 0 {
                    0.0
                } else {
                    group.iter().map(|c| f(c) as f64).sum::<f64>() / n as f64
                }
            };
            let avg_likes = mean(&|c| c.message.likes);
            let avg_reshares = mean(&|c| c.message.reshares);
            StanceRow {
                stance: *s,
                count: n,
                share_pct: 100.0 * n as f64 / total,
                avg_likes,
                avg_reshares,
                avg_engagement: avg_likes + avg_reshares,
            }
        })
        .collect()
}
