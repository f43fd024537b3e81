//! Weekly date-indexed series, alignment to the Friday grid, variable
//! transforms and descriptive statistics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series name must be nonempty")]
    EmptyName,
    #[error("series `{0}` has no observations")]
    Empty(String),
    #[error("dates out of order at {0}")]
    Unsorted(NaiveDate),
    #[error("date {0} is not a Friday")]
    NotFriday(NaiveDate),
    #[error("dates {0} and {1} are not exactly one week apart")]
    Gap(NaiveDate, NaiveDate),
    #[error("length mismatch: {dates} dates vs {values} values")]
    LengthMismatch { dates: usize, values: usize },
    #[error("non-finite value at {0}")]
    NonFinite(NaiveDate),
    #[error("nonpositive value {value} at {date} under a log transform")]
    NonPositive { date: NaiveDate, value: f64 },
    #[error("series too short for {0:?}")]
    TooShort(TransformKind),
    #[error("series `{0}` has no non-missing values")]
    AllMissing(String),
    #[error("fewer than 3 overlapping observations")]
    InsufficientOverlap,
    #[error("zero variance in `{0}`")]
    ZeroVariance(String),
    #[error("series `{0}` contains missing values")]
    HasMissing(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad date `{0}`")]
    BadDate(String),
    #[error("bad number `{0}`")]
    BadNumber(String),
}

pub type Result<T> = std::result::Result<T, SeriesError>;

/// Friday that ends the week containing `date` (weeks run Saturday..Friday).
pub fn week_ending_friday(date: NaiveDate) -> NaiveDate {
    let ahead = (Weekday::Fri.num_days_from_monday() + 7 - date.weekday().num_days_from_monday()) % 7;
    date + Duration::days(ahead as i64)
}

/// Consecutive Fridays from `first` to `last` inclusive.
pub fn friday_grid(first: NaiveDate, last: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = week_ending_friday(first);
    let end = week_ending_friday(last);
    while d <= end {
        out.push(d);
        d += Duration::days(7);
    }
    out
}

/// A named series on the week-ending-Friday grid. Missing weeks carry
/// `NaN` in `values` and a set flag in `missing`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeeklySeries {
    name: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl WeeklySeries {
    /// Builds a series, treating non-finite values as missing.
    pub fn new(name: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        let missing = values.iter().map(|v| !v.is_finite()).collect();
        Self::with_missing(name, dates, values, missing)
    }

    pub fn with_missing(name: impl Into<String>, dates: Vec<NaiveDate>, mut values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(SeriesError::EmptyName);
        }
        if dates.len() != values.len() || dates.len() != missing.len() {
            return Err(SeriesError::LengthMismatch { dates: dates.len(), values: values.len() });
        }
        for (i, d) in dates.iter().enumerate() {
            if d.weekday() != Weekday::Fri {
                return Err(SeriesError::NotFriday(*d));
            }
            if i > 0 {
                let prev = dates[i - 1];
                if *d <= prev {
                    return Err(SeriesError::Unsorted(*d));
                }
                if *d - prev != Duration::days(7) {
                    return Err(SeriesError::Gap(prev, *d));
                }
            }
        }
        for (i, v) in values.iter_mut().enumerate() {
            if missing[i] {
                *v = f64::NAN;
            } else if !v.is_finite() {
                return Err(SeriesError::NonFinite(dates[i]));
            }
        }
        Ok(Self { name, dates, values, missing })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        let name = name.into();
        if !name.is_empty() {
            self.name = name;
        }
        self
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Raw values; missing entries are `NaN`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        if self.missing[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        let first = *self.dates.first()?;
        let offset = (date - first).num_days();
        if offset < 0 || offset % 7 != 0 {
            return None;
        }
        let i = (offset / 7) as usize;
        if i < self.len() {
            self.get(i)
        } else {
            None
        }
    }

    pub fn n_present(&self) -> usize {
        self.missing.iter().filter(|m| !**m).count()
    }

    /// Non-missing `(date, value)` pairs.
    pub fn present(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.dates.iter().zip(&self.values).zip(&self.missing).filter(|(_, m)| !**m).map(|((d, v), _)| (*d, *v))
    }

    pub fn present_values(&self) -> Vec<f64> {
        self.present().map(|(_, v)| v).collect()
    }

    /// Values, failing if any week is missing.
    pub fn complete_values(&self) -> Result<Vec<f64>> {
        if self.missing.iter().any(|m| *m) {
            return Err(SeriesError::HasMissing(self.name.clone()));
        }
        Ok(self.values.clone())
    }

    /// Restricts to the contiguous date span `[from, to]`.
    pub fn slice_dates(&self, from: NaiveDate, to: NaiveDate) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.dates[i] >= from && self.dates[i] <= to).collect();
        Self {
            name: self.name.clone(),
            dates: idx.iter().map(|&i| self.dates[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            missing: idx.iter().map(|&i| self.missing[i]).collect(),
        }
    }

    /// Trims leading and trailing missing weeks.
    pub fn trim_missing(&self) -> Self {
        let first = self.missing.iter().position(|m| !m);
        let last = self.missing.iter().rposition(|m| !m);
        match (first, last) {
            (Some(a), Some(b)) => self.slice_dates(self.dates[a], self.dates[b]),
            _ => Self { name: self.name.clone(), dates: vec![], values: vec![], missing: vec![] },
        }
    }
}

impl PartialEq for WeeklySeries {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.dates == other.dates
            && self.missing == other.missing
            && self.values.iter().zip(&other.values).zip(&self.missing).all(|((a, b), m)| *m || a == b)
    }
}

/// Native-frequency to weekly aggregation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlignRule {
    /// Latest observation on or before the Friday, within the week.
    LastValue,
    /// Mean of all observations in (previous Friday, Friday].
    WeekMean,
}

/// Aggregates dated observations onto the Friday grid spanning them.
/// Weeks without observations are flagged missing.
pub fn align_weekly(name: &str, raw: &[(NaiveDate, f64)], rule: AlignRule) -> Result<WeeklySeries> {
    if raw.is_empty() {
        return Err(SeriesError::Empty(name.to_string()));
    }
    for w in raw.windows(2) {
        if w[1].0 < w[0].0 {
            return Err(SeriesError::Unsorted(w[1].0));
        }
    }
    let grid = friday_grid(raw[0].0, raw[raw.len() - 1].0);
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let first = grid[0];
    for (d, v) in raw {
        if !v.is_finite() {
            continue;
        }
        let i = ((week_ending_friday(*d) - first).num_days() / 7) as usize;
        buckets[i].push(*v);
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut missing = Vec::with_capacity(grid.len());
    for b in &buckets {
        if b.is_empty() {
            values.push(f64::NAN);
            missing.push(true);
        } else {
            let v = match rule {
                AlignRule::LastValue => b[b.len() - 1],
                AlignRule::WeekMean => b.iter().sum::<f64>() / b.len() as f64,
            };
            values.push(v);
            missing.push(false);
        }
    }
    WeeklySeries::with_missing(name, grid, values, missing)
}

/// Variable transforms applied before analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransformKind {
    Level,
    LogReturn,
    GrowthRate,
    LogDiff,
    Diff1,
    Diff2,
}

impl TransformKind {
    /// Number of leading dates dropped.
    pub fn order(self) -> usize {
        match self {
            TransformKind::Level => 0,
            TransformKind::Diff2 => 2,
            _ => 1,
        }
    }

    fn is_log(self) -> bool {
        matches!(self, TransformKind::LogReturn | TransformKind::LogDiff)
    }
}

pub fn transform(s: &WeeklySeries, kind: TransformKind) -> Result<WeeklySeries> {
    if kind == TransformKind::Level {
        return Ok(s.clone());
    }
    if kind.is_log() {
        for (d, v) in s.present() {
            if v <= 0.0 {
                return Err(SeriesError::NonPositive { date: d, value: v });
            }
        }
    }
    if s.len() <= kind.order() {
        return Err(SeriesError::TooShort(kind));
    }
    let step = |a: Option<f64>, b: Option<f64>| -> Option<f64> {
        let (prev, cur) = (a?, b?);
        Some(match kind {
            TransformKind::LogReturn | TransformKind::LogDiff => (cur / prev).ln(),
            TransformKind::GrowthRate => cur / prev - 1.0,
            _ => cur - prev,
        })
    };
    let once: Vec<Option<f64>> = (1..s.len()).map(|i| step(s.get(i - 1), s.get(i))).collect();
    let out: Vec<Option<f64>> =
        if kind == TransformKind::Diff2 { (1..once.len()).map(|i| step(once[i - 1], once[i])).collect() } else { once };
    let dates = s.dates[kind.order()..].to_vec();
    let missing: Vec<bool> = out.iter().map(|v| v.is_none()).collect();
    let values = out.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    WeeklySeries::with_missing(s.name.clone(), dates, values, missing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
    pub n: usize,
}

/// Linear-interpolation percentile of an ascending slice, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    // keep exact order statistics at the ends so monotonicity survives rounding
    if frac == 0.0 {
        return sorted[lo];
    }
    let v = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    v.clamp(sorted[lo], sorted[hi])
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

/// Summary statistics of finite values with population moments and
/// non-excess kurtosis.
pub fn summarize(values: &[f64]) -> Option<SummaryStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let sd = m2.sqrt();
    let (skewness, kurtosis) = if sd > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2)) } else { (0.0, 0.0) };
    Some(SummaryStats {
        mean,
        sd,
        skewness,
        kurtosis,
        min: v[0],
        p5: percentile_sorted(&v, 0.05),
        p25: percentile_sorted(&v, 0.25),
        median: percentile_sorted(&v, 0.5),
        p75: percentile_sorted(&v, 0.75),
        p95: percentile_sorted(&v, 0.95),
        max: v[v.len() - 1],
        n: v.len(),
    })
}

pub fn describe(s: &WeeklySeries) -> Result<SummaryStats> {
    summarize(&s.present_values()).ok_or_else(|| SeriesError::AllMissing(s.name.clone()))
}

/// Pearson correlation over the dates where both series are present.
pub fn pearson_corr(a: &WeeklySeries, b: &WeeklySeries) -> Result<f64> {
    let bmap: BTreeMap<NaiveDate, f64> = b.present().collect();
    let pairs: Vec<(f64, f64)> = a.present().filter_map(|(d, x)| bmap.get(&d).map(|y| (x, *y))).collect();
    if pairs.len() < 3 {
        return Err(SeriesError::InsufficientOverlap);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    correlation(&xs, &ys).map_err(|which| SeriesError::ZeroVariance(if which == 0 { a.name.clone() } else { b.name.clone() }))
}

/// Pearson correlation of equal-length slices; `Err(0|1)` names the
/// zero-variance argument.
pub fn correlation(x: &[f64], y: &[f64]) -> std::result::Result<f64, usize> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(0);
    }
    if syy <= 0.0 {
        return Err(1);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Intersects several series on dates where every one is present.
/// Returns the common dates and one value column per input.
pub fn align_present(series: &[&WeeklySeries]) -> (Vec<NaiveDate>, Vec<Vec<f64>>) {
    if series.is_empty() {
        return (vec![], vec![]);
    }
    let maps: Vec<BTreeMap<NaiveDate, f64>> = series.iter().map(|s| s.present().collect()).collect();
    let dates: Vec<NaiveDate> = maps[0].keys().filter(|d| maps.iter().all(|m| m.contains_key(d))).copied().collect();
    let cols = maps.iter().map(|m| dates.iter().map(|d| m[d]).collect()).collect();
    (dates, cols)
}

/// Like [`align_present`] but keeps only the longest run of consecutive
/// weeks, so lagged regressions never straddle a gap.
pub fn align_contiguous(series: &[&WeeklySeries]) -> (Vec<NaiveDate>, Vec<Vec<f64>>) {
    let (dates, cols) = align_present(series);
    if dates.is_empty() {
        return (dates, cols);
    }
    let (mut best, mut start) = ((0usize, 1usize), 0usize);
    for i in 1..=dates.len() {
        if i == dates.len() || dates[i] - dates[i - 1] != Duration::days(7) {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i;
        }
    }
    let (a, b) = best;
    (dates[a..b].to_vec(), cols.into_iter().map(|c| c[a..b].to_vec()).collect())
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    let t = s.trim();
    let head = t.get(..10).unwrap_or(t);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").map_err(|_| SeriesError::BadDate(s.to_string()))
}

/// Dated observations per column, read from `date,<name1>,<name2>,...`.
/// Blank cells are skipped (missing).
pub fn read_observations_csv<R: Read>(reader: R) -> Result<Vec<(String, Vec<(NaiveDate, f64)>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut cols: Vec<Vec<(NaiveDate, f64)>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let date = parse_date(rec.get(0).unwrap_or(""))?;
        for (j, cell) in rec.iter().skip(1).enumerate().take(names.len()) {
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| SeriesError::BadNumber(cell.to_string()))?;
            cols[j].push((date, v));
        }
    }
    Ok(names.into_iter().zip(cols).collect())
}

/// Reads a CSV already on the Friday grid. A single `value` column takes
/// the name `default_name`.
pub fn read_weekly_csv<R: Read>(reader: R, default_name: &str) -> Result<Vec<WeeklySeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(|h| if h == "value" { default_name.to_string() } else { h.to_string() }).collect();
    let mut dates = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec?;
        dates.push(parse_date(rec.get(0).unwrap_or(""))?);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            if cell.is_empty() {
                col.push(f64::NAN);
            } else {
                col.push(cell.parse().map_err(|_| SeriesError::BadNumber(cell.to_string()))?);
            }
        }
    }
    names.into_iter().zip(cols).map(|(n, c)| WeeklySeries::new(n, dates.clone(), c)).collect()
}

pub fn read_weekly_csv_path(path: &Path, default_name: &str) -> Result<Vec<WeeklySeries>> {
    read_weekly_csv(std::fs::File::open(path)?, default_name)
}

/// Writes series on the union of their dates; missing cells are blank.
pub fn write_weekly_csv<W: Write>(writer: W, series: &[&WeeklySeries]) -> Result<()> {
    let mut all: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    for (j, s) in series.iter().enumerate() {
        for (i, d) in s.dates().iter().enumerate() {
            all.entry(*d).or_insert_with(|| vec![None; series.len()])[j] = s.get(i);
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(series.iter().map(|s| s.name().to_string()));
    w.write_record(&header)?;
    for (d, row) in all {
        let mut rec = vec![d.to_string()];
        rec.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the variable catalogue: transform and weekly alignment rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableDef {
    pub name: &'static str,
    pub transform: TransformKind,
    pub align: AlignRule,
}

const fn var(name: &'static str, transform: TransformKind, align: AlignRule) -> VariableDef {
    VariableDef { name, transform, align }
}

/// The nineteen model variables, in descriptive-table order.
pub const VARIABLES: [VariableDef; 19] = [
    var("Btc", TransformKind::LogReturn, AlignRule::LastValue),
    var("MPE", TransformKind::Level, AlignRule::WeekMean),
    var("NewsSent", TransformKind::Level, AlignRule::LastValue),
    var("PolUncert", TransformKind::GrowthRate, AlignRule::LastValue),
    var("SP500", TransformKind::LogReturn, AlignRule::LastValue),
    var("Brent", TransformKind::GrowthRate, AlignRule::LastValue),
    var("Gold", TransformKind::LogReturn, AlignRule::LastValue),
    var("HighYield", TransformKind::GrowthRate, AlignRule::LastValue),
    var("GeopolRisk", TransformKind::GrowthRate, AlignRule::WeekMean),
    var("VIX", TransformKind::GrowthRate, AlignRule::LastValue),
    var("USDollar", TransformKind::GrowthRate, AlignRule::LastValue),
    var("Infect", TransformKind::Level, AlignRule::WeekMean),
    var("JoblessClaim", TransformKind::LogDiff, AlignRule::LastValue),
    var("ExchRate", TransformKind::LogDiff, AlignRule::WeekMean),
    var("FFR", TransformKind::Level, AlignRule::LastValue),
    var("5yInflExp", TransformKind::Level, AlignRule::LastValue),
    var("GgleInfl", TransformKind::Level, AlignRule::LastValue),
    var("GgleReces", TransformKind::Level, AlignRule::LastValue),
    var("GgleClimate", TransformKind::Level, AlignRule::LastValue),
];

pub fn variable(name: &str) -> Option<VariableDef> {
    VARIABLES.iter().copied().find(|v| v.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn weekly(values: &[f64]) -> WeeklySeries {
        let start = d("2020-01-03");
        let dates = (0..values.len()).map(|i| start + Duration::days(7 * i as i64)).collect();
        WeeklySeries::new("x", dates, values.to_vec()).unwrap()
    }

    #[test]
    fn friday_snapping() {
        assert_eq!(week_ending_friday(d("2024-01-01")), d("2024-01-05"));
        assert_eq!(week_ending_friday(d("2024-01-05")), d("2024-01-05"));
        assert_eq!(week_ending_friday(d("2024-01-06")), d("2024-01-12"));
    }

    #[test]
    fn constant_daily_last_value() {
        let raw: Vec<_> = (0..19).map(|i| (d("2024-01-01") + Duration::days(i), 5.0)).collect();
        let s = align_weekly("c", &raw, AlignRule::LastValue).unwrap();
        assert_eq!(s.values(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn week_mean_of_weekdays() {
        let raw: Vec<_> = (0..5).map(|i| (d("2024-01-01") + Duration::days(i), (i + 1) as f64)).collect();
        let s = align_weekly("m", &raw, AlignRule::WeekMean).unwrap();
        assert_eq!(s.values(), &[3.0]);
    }

    #[test]
    fn last_value_takes_friday() {
        let raw = vec![(d("2024-01-02"), 1.0), (d("2024-01-04"), 2.0), (d("2024-01-05"), 7.0)];
        let s = align_weekly("f", &raw, AlignRule::LastValue).unwrap();
        assert_eq!(s.values(), &[7.0]);
    }

    #[test]
    fn empty_weeks_are_missing() {
        let raw = vec![(d("2024-01-05"), 1.0), (d("2024-01-19"), 2.0)];
        let s = align_weekly("g", &raw, AlignRule::LastValue).unwrap();
        assert_eq!(s.missing(), &[false, true, false]);
    }

    #[test]
    fn align_errors() {
        assert!(matches!(align_weekly("e", &[], AlignRule::LastValue), Err(SeriesError::Empty(_))));
        let raw = vec![(d("2024-01-05"), 1.0), (d("2024-01-01"), 2.0)];
        assert!(matches!(align_weekly("u", &raw, AlignRule::LastValue), Err(SeriesError::Unsorted(_))));
    }

    #[test]
    fn transform_examples() {
        let s = weekly(&[100.0, 100.0 * std::f64::consts::E]);
        let r = transform(&s, TransformKind::LogReturn).unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-15);
        assert_eq!(r.dates(), &s.dates()[1..]);
        let g = transform(&weekly(&[100.0, 110.0]), TransformKind::GrowthRate).unwrap();
        assert!((g.values()[0] - 0.10).abs() < 1e-12);
        let d2 = transform(&weekly(&[3.0, 3.0, 3.0, 3.0]), TransformKind::Diff2).unwrap();
        assert_eq!(d2.values(), &[0.0, 0.0]);
        assert_eq!(d2.len(), 2);
    }

    #[test]
    fn log_transform_names_bad_date() {
        let s = weekly(&[1.0, 0.0, 2.0]);
        match transform(&s, TransformKind::LogDiff) {
            Err(SeriesError::NonPositive { date, .. }) => assert_eq!(date, s.dates()[1]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(transform(&weekly(&[1.0, 2.0]), TransformKind::Diff2), Err(SeriesError::TooShort(_))));
    }

    #[test]
    fn missing_propagates_through_transform() {
        let s = weekly(&[1.0, f64::NAN, 3.0, 4.0]);
        let t = transform(&s, TransformKind::Diff1).unwrap();
        assert_eq!(t.missing(), &[true, true, false]);
        assert_eq!(t.get(2), Some(1.0));
    }

    #[test]
    fn describe_examples() {
        let s = describe(&weekly(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!((s.mean, s.sd, s.skewness, s.kurtosis), (1.0, 0.0, 0.0, 0.0));
        let s = describe(&weekly(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(s.mean, 2.5);
        assert!((s.sd - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(s.median, 2.5);
        assert!(describe(&weekly(&[f64::NAN, f64::NAN])).is_err());
    }

    #[test]
    fn gaussian_kurtosis_near_three() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let s = summarize(&v).unwrap();
        assert!((s.kurtosis - 3.0).abs() < 0.1, "{}", s.kurtosis);
    }

    #[test]
    fn correlation_examples() {
        let x = weekly(&[1.0, 2.0, 3.0]);
        let neg = weekly(&[-1.0, -2.0, -3.0]);
        let y = weekly(&[2.0, 4.0, 7.0]);
        assert!((pearson_corr(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_corr(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        // sxy = 5, sxx = 2, syy = 38/3
        let expected = 5.0 / (2.0f64 * 38.0 / 3.0).sqrt();
        assert!((pearson_corr(&x, &y).unwrap() - expected).abs() < 1e-12);
        // numpy.corrcoef gives 0.9933992677987828
        assert!((expected - 0.993_399_267_798_782_8).abs() < 1e-12);
        assert!(matches!(pearson_corr(&x, &weekly(&[1.0, 1.0, 1.0])), Err(SeriesError::ZeroVariance(_))));
        assert!(matches!(pearson_corr(&x, &weekly(&[1.0, 2.0])), Err(SeriesError::InsufficientOverlap)));
    }

    #[test]
    fn rejects_bad_grids() {
        let dates = vec![d("2024-01-05"), d("2024-01-19")];
        assert!(matches!(WeeklySeries::new("x", dates, vec![1.0, 2.0]), Err(SeriesError::Gap(..))));
        assert!(matches!(WeeklySeries::new("x", vec![d("2024-01-04")], vec![1.0]), Err(SeriesError::NotFriday(_))));
        assert!(matches!(WeeklySeries::new("", vec![], vec![]), Err(SeriesError::EmptyName)));
    }

    #[test]
    fn csv_round_trip() {
        let a = weekly(&[1.5, f64::NAN, 3.0]);
        let b = weekly(&[4.0, 5.0, 6.0]).renamed("y");
        let mut buf = Vec::new();
        write_weekly_csv(&mut buf, &[&a, &b]).unwrap();
        let back = read_weekly_csv(buf.as_slice(), "v").unwrap();
        assert_eq!(back[0], a);
        assert_eq!(back[1], b);
        let single = read_weekly_csv("date,value\n2020-01-03,1\n2020-01-10,\n".as_bytes(), "z").unwrap();
        assert_eq!(single[0].name(), "z");
        assert_eq!(single[0].missing(), &[false, true]);
    }

    #[test]
    fn catalogue_covers_all_variables_once() {
        let mut names: Vec<_> = VARIABLES.iter().map(|v| v.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 19);
        assert_eq!(variable("SP500").unwrap().transform, TransformKind::LogReturn);
        assert_eq!(variable("ExchRate").unwrap().align, AlignRule::WeekMean);
    }
}
