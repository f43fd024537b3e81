//! Analysis stages. Each reads upstream artifacts through the context and
//! writes its own directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;

use chrono::NaiveDate;
use nml_core::baseline::{compare_fold, difference, write_comparison_csv, ComparisonRow};
use nml_core::causality::{granger_lag_table, select_lag_aic};
use nml_core::explain::{aggregate_attributions, explain_ensemble, interaction_analysis, AggregateMode};
use nml_core::forecasting::{walk_forward_ensemble, Dataset, EnsembleResult, LstmParams, Standardizer};
use nml_core::messages::{
    build_mpe_weekly, classify_batch, event_study, partition_regime, read_jsonl, read_messages, stance_summary, write_jsonl,
    ClassifiedMessage, LexiconClassifier, Regime, RegimeMode, RemoteClassifier, StanceClassifier, LEXICON_VERSION,
};
use nml_core::series::{
    align_contiguous, align_weekly, describe, pearson_corr, read_observations_csv, read_weekly_csv_path, transform, variable,
    week_ending_friday, write_weekly_csv, AlignRule, TransformKind, WeeklySeries, VARIABLES,
};
use nml_core::stat_tests::{adf_test, regime_distribution_tests, schwert_max_lag, RegimeTests};
use nml_core::vmd::{vmd_decompose, vmd_granger_scan, write_imf_csv};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::Backend;
use crate::error::Result;
use crate::manifest::sha256_file;
use crate::pipeline::StageContext;
use crate::stage::Stage;

pub const CHECKPOINT_FORMAT: &str = "nml-lstm";
pub const CHECKPOINT_VERSION: u32 = 1;

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn opt_date(d: Option<NaiveDate>) -> String {
    d.map_or(String::new(), |d| d.to_string())
}

pub(crate) fn load_weekly(ctx: &StageContext, stage: Stage, name: &str) -> Result<Vec<WeeklySeries>> {
    let path = ctx.input(stage, name);
    read_weekly_csv_path(&path, "value").map_err(|e| ctx.fail(format!("{}: {e}", path.display())))
}

pub(crate) fn find<'a>(ctx: &StageContext, series: &'a [WeeklySeries], name: &str) -> Result<&'a WeeklySeries> {
    series.iter().find(|s| s.name() == name).ok_or_else(|| ctx.fail(format!("series {name} not found")))
}

pub(crate) fn read_events(ctx: &StageContext) -> Result<Vec<NaiveDate>> {
    let path = ctx.input(Stage::Ingest, "events.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| ctx.fail(e))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| ctx.fail(e))?;
            NaiveDate::parse_from_str(r.get(1).unwrap_or(""), "%Y-%m-%d").map_err(|e| ctx.fail(e))
        })
        .collect()
}

/// `(mpe, rate)` regime labels per date from the index stage.
pub(crate) fn read_regimes(ctx: &StageContext) -> Result<(Vec<(NaiveDate, Regime)>, Vec<(NaiveDate, Regime)>)> {
    let path = ctx.input(Stage::Index, "regimes.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| ctx.fail(e))?;
    let (mut mpe, mut rate) = (Vec::new(), Vec::new());
    for r in rdr.records() {
        let r = r.map_err(|e| ctx.fail(e))?;
        let d = NaiveDate::parse_from_str(r.get(0).unwrap_or(""), "%Y-%m-%d").map_err(|e| ctx.fail(e))?;
        if let Some(g) = r.get(1).and_then(Regime::from_name) {
            mpe.push((d, g));
        }
        if let Some(g) = r.get(2).and_then(Regime::from_name) {
            rate.push((d, g));
        }
    }
    Ok((mpe, rate))
}

pub fn ingest(ctx: &StageContext) -> Result<()> {
    let data = &ctx.cfg.data;
    let file = File::open(&data.messages).map_err(|e| ctx.fail(format!("{}: {e}", data.messages.display())))?;
    let mut msgs = read_messages(BufReader::new(file)).map_err(|e| ctx.fail(e))?;
    msgs.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    write_jsonl(ctx.create("messages.jsonl")?, &msgs).map_err(|e| ctx.fail(e))?;

    let mut columns: Vec<(String, Vec<(NaiveDate, f64)>)> = Vec::new();
    for path in &data.macro_files {
        let f = File::open(path).map_err(|e| ctx.fail(format!("{}: {e}", path.display())))?;
        for (name, mut obs) in read_observations_csv(f).map_err(|e| ctx.fail(format!("{}: {e}", path.display())))? {
            if columns.iter().any(|(n, _)| *n == name) {
                return Err(ctx.fail(format!("variable {name} appears in more than one column")));
            }
            obs.sort_by_key(|o| o.0);
            columns.push((name, obs));
        }
    }
    let rank = |n: &str| VARIABLES.iter().position(|v| v.name == n).unwrap_or(usize::MAX);
    columns.sort_by_key(|(n, _)| rank(n));
    let mut weekly = Vec::with_capacity(columns.len());
    let mut variables = Vec::new();
    for (name, obs) in &columns {
        let rule = match variable(name) {
            Some(v) => v.align,
            None => {
                log::warn!("{name} is not in the variable catalogue; aligned by last value");
                AlignRule::LastValue
            }
        };
        let s = align_weekly(name, obs, rule).map_err(|e| ctx.fail(format!("{name}: {e}")))?;
        variables.push(json!({
            "name": name,
            "align": rule,
            "observations": obs.len(),
            "first_week": opt_date(s.dates().first().copied()),
            "last_week": opt_date(s.dates().last().copied()),
            "weeks_present": s.n_present(),
            "weeks": s.len(),
        }));
        weekly.push(s);
    }
    let refs: Vec<&WeeklySeries> = weekly.iter().collect();
    write_weekly_csv(ctx.create("macro_weekly.csv")?, &refs).map_err(|e| ctx.fail(e))?;

    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&data.events)
        .map_err(|e| ctx.fail(format!("{}: {e}", data.events.display())))?;
    let col = rdr
        .headers()
        .map_err(|e| ctx.fail(e))?
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| ctx.fail("event file has no date column"))?;
    let mut events = BTreeMap::new();
    for r in rdr.records() {
        let r = r.map_err(|e| ctx.fail(e))?;
        let raw = r.get(col).unwrap_or("");
        let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| ctx.fail(format!("bad event date {raw:?}")))?;
        events.entry(d).or_insert(week_ending_friday(d));
    }
    let mut w = csv_writer(ctx.create("events.csv")?);
    w.write_record(["date", "week"]).map_err(|e| ctx.fail(e))?;
    for (d, week) in &events {
        w.write_record([d.to_string(), week.to_string()]).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    ctx.write_json(
        "summary.json",
        &json!({
            "messages": msgs.len(),
            "first_message": opt_date(msgs.first().map(|m| m.date())),
            "last_message": opt_date(msgs.last().map(|m| m.date())),
            "events": events.len(),
            "variables": variables,
        }),
    )
}

pub fn classify(ctx: &StageContext) -> Result<()> {
    let path = ctx.input(Stage::Ingest, "messages.jsonl");
    let file = File::open(&path).map_err(|e| ctx.fail(e))?;
    let msgs = read_messages(BufReader::new(file)).map_err(|e| ctx.fail(e))?;
    let c = &ctx.cfg.classifier;
    let backend: Box<dyn StanceClassifier> = match c.backend {
        Backend::Lexicon => Box::new(LexiconClassifier::new()),
        Backend::Remote => {
            let url = c.endpoint().ok_or_else(|| ctx.fail("remote classifier has no endpoint"))?;
            Box::new(RemoteClassifier::new(c.remote(url)))
        }
    };
    let outcome = classify_batch(&msgs, backend.as_ref(), c.batch()).map_err(|e| ctx.fail(e))?;
    write_jsonl(ctx.create("classified.jsonl")?, &outcome.classified).map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("stance_summary.csv")?);
    w.write_record(["Category", "Score", "Count", "Share (%)", "Avg. Likes", "Avg. Reshares", "Avg. Engag."]).map_err(|e| ctx.fail(e))?;
    for r in stance_summary(&outcome.classified) {
        w.write_record([
            r.stance.label().to_string(),
            r.stance.value().to_string(),
            r.count.to_string(),
            format!("{:.2}", r.share_pct),
            format!("{:.2}", r.avg_likes),
            format!("{:.2}", r.avg_reshares),
            format!("{:.2}", r.avg_engagement),
        ])
        .map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "backend": c.backend,
            "lexicon_version": LEXICON_VERSION,
            "messages": outcome.classified.len(),
            "neutral_fallbacks": outcome.fallbacks,
        }),
    )
}

pub fn index(ctx: &StageContext) -> Result<()> {
    let path = ctx.input(Stage::Classify, "classified.jsonl");
    let file = File::open(&path).map_err(|e| ctx.fail(e))?;
    let classified: Vec<ClassifiedMessage> = read_jsonl(BufReader::new(file)).map_err(|e| ctx.fail(e))?;
    let mpe = build_mpe_weekly(&classified).map_err(|e| ctx.fail(e))?;
    let mut w = csv_writer(ctx.create("mpe.csv")?);
    w.write_record(["date", "MPE", "messages", "weight"]).map_err(|e| ctx.fail(e))?;
    for (i, d) in mpe.series.dates().iter().enumerate() {
        w.write_record([
            d.to_string(),
            mpe.series.get(i).map_or(String::new(), |v| v.to_string()),
            mpe.counts[i].to_string(),
            mpe.weights[i].to_string(),
        ])
        .map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let events = read_events(ctx)?;
    let es = event_study(&mpe.series, &events, ctx.cfg.variables.event_half_window).map_err(|e| ctx.fail(e))?;
    let mut w = csv_writer(ctx.create("event_study.csv")?);
    w.write_record(["regime", "offset", "mean", "sd", "events"]).map_err(|e| ctx.fail(e))?;
    for g in &es.groups {
        for (k, off) in g.offsets.iter().enumerate() {
            w.write_record([
                g.regime.name().to_string(),
                off.to_string(),
                g.mean[k].to_string(),
                g.sd[k].to_string(),
                g.events.len().to_string(),
            ])
            .map_err(|e| ctx.fail(e))?;
        }
    }
    w.flush().map_err(|e| ctx.fail(e))?;
    ctx.write_json("event_study.json", &es)?;

    let macro_weekly = load_weekly(ctx, Stage::Ingest, "macro_weekly.csv")?;
    let rate = find(ctx, &macro_weekly, &ctx.cfg.variables.rate)?;
    let mut labels: BTreeMap<NaiveDate, (Option<Regime>, Option<Regime>)> = BTreeMap::new();
    for (d, r) in partition_regime(&mpe.series, RegimeMode::Mpe) {
        labels.entry(d).or_default().0 = Some(r);
    }
    for (d, r) in partition_regime(rate, RegimeMode::Rate) {
        labels.entry(d).or_default().1 = Some(r);
    }
    let mut w = csv_writer(ctx.create("regimes.csv")?);
    w.write_record(["date", "mpe_regime", "rate_regime"]).map_err(|e| ctx.fail(e))?;
    for (d, (m, r)) in labels {
        let name = |g: Option<Regime>| g.map_or("", |g| g.name()).to_string();
        w.write_record([d.to_string(), name(m), name(r)]).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))
}

/// Catalogue variables available to the analysis, in catalogue order.
fn raw_variables(ctx: &StageContext) -> Result<Vec<(WeeklySeries, TransformKind)>> {
    let macro_weekly = load_weekly(ctx, Stage::Ingest, "macro_weekly.csv")?;
    let mpe = load_weekly(ctx, Stage::Index, "mpe.csv")?;
    let mpe = find(ctx, &mpe, "MPE")?;
    for s in &macro_weekly {
        if variable(s.name()).is_none() {
            log::warn!("{} is not in the variable catalogue and is left out of the analysis", s.name());
        }
    }
    let mut out = Vec::new();
    for def in VARIABLES {
        let s = if def.name == "MPE" { Some(mpe) } else { macro_weekly.iter().find(|s| s.name() == def.name) };
        match s {
            Some(s) => out.push((s.clone(), def.transform)),
            None => log::warn!("variable {} is missing from the inputs", def.name),
        }
    }
    let v = &ctx.cfg.variables;
    for name in [&v.target, &v.rate] {
        if !out.iter().any(|(s, _)| s.name() == name) {
            return Err(ctx.fail(format!("required variable {name} is missing")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdfRow {
    pub variable: String,
    pub transform: TransformKind,
    pub differences: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub lags: Option<usize>,
    pub nobs: usize,
    pub stationary: bool,
    pub error: Option<String>,
}

/// Differences the longest gap-free run until ADF rejects a unit root at
/// `alpha` or `max_d` differences are reached.
fn stationarize(s: &WeeklySeries, transform: TransformKind, alpha: f64, max_d: usize) -> (Option<WeeklySeries>, AdfRow) {
    let (dates, cols) = align_contiguous(&[s]);
    let mut row = AdfRow {
        variable: s.name().to_string(),
        transform,
        differences: 0,
        statistic: None,
        p_value: None,
        lags: None,
        nobs: 0,
        stationary: false,
        error: None,
    };
    if dates.is_empty() {
        row.error = Some("no observations".into());
        return (None, row);
    }
    for d in 0..=max_d {
        let values = difference(&cols[0], d);
        row.differences = d;
        row.nobs = values.len();
        match adf_test(&values, schwert_max_lag(values.len())) {
            Ok(t) => {
                row.statistic = Some(t.statistic);
                row.p_value = Some(t.p_value);
                row.lags = Some(t.df);
                row.error = None;
                row.stationary = t.p_value < alpha;
            }
            Err(e) => {
                row.error = Some(e.to_string());
                row.stationary = false;
            }
        }
        if row.stationary || d == max_d {
            let out = WeeklySeries::new(s.name(), dates[d..].to_vec(), values).ok();
            return (out, row);
        }
    }
    unreachable!("loop returns at max_d")
}

fn regime_rows(w: &mut csv::Writer<impl std::io::Write>, partition: &str, r: &RegimeTests) -> csv::Result<()> {
    w.write_record([
        partition.to_string(),
        format!("{:.3}", r.kruskal.statistic),
        format!("{:.4}", r.kruskal.p_value),
        format!("{:.3}", r.levene.statistic),
        format!("{:.4}", r.levene.p_value),
        format!("{:.4}", r.max_tail_q5),
        r.tail_regime.name().to_string(),
    ])
}

pub fn stats(ctx: &StageContext) -> Result<()> {
    let st = &ctx.cfg.stats;
    let raw = raw_variables(ctx)?;
    let mut transformed = Vec::with_capacity(raw.len());
    for (s, kind) in &raw {
        transformed.push(transform(s, *kind).map_err(|e| ctx.fail(format!("{}: {e}", s.name())))?);
    }
    let refs: Vec<&WeeklySeries> = transformed.iter().collect();
    write_weekly_csv(ctx.create("transformed.csv")?, &refs).map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("summary.csv")?);
    w.write_record(["Variable", "Mean", "SD", "Skew.", "Kurt.", "Min", "5%", "25%", "Med", "75%", "95%", "Max", "N"])
        .map_err(|e| ctx.fail(e))?;
    for s in &transformed {
        let d = describe(s).map_err(|e| ctx.fail(e))?;
        let mut rec = vec![s.name().to_string()];
        rec.extend(
            [d.mean, d.sd, d.skewness, d.kurtosis, d.min, d.p5, d.p25, d.median, d.p75, d.p95, d.max].iter().map(|v| format!("{v:.4}")),
        );
        rec.push(d.n.to_string());
        w.write_record(&rec).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("correlations.csv")?);
    let mut header = vec![String::new()];
    header.extend(transformed.iter().map(|s| s.name().to_string()));
    w.write_record(&header).map_err(|e| ctx.fail(e))?;
    for a in &transformed {
        let mut rec = vec![a.name().to_string()];
        rec.extend(transformed.iter().map(|b| pearson_corr(a, b).map_or(String::new(), |r| format!("{r:.3}"))));
        w.write_record(&rec).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let mut stationary = Vec::new();
    let mut adf_rows = Vec::new();
    for (s, (_, kind)) in transformed.iter().zip(&raw) {
        let (out, row) = stationarize(s, *kind, st.adf_alpha, st.max_differences);
        if !row.stationary {
            log::warn!("{}: unit root not rejected after {} difference(s)", row.variable, row.differences);
        }
        stationary.extend(out);
        adf_rows.push(row);
    }
    let mut w = csv_writer(ctx.create("adf.csv")?);
    w.write_record(["Variable", "Transform", "Differences", "ADF statistic", "p-value", "Lags", "N", "Stationary", "Note"])
        .map_err(|e| ctx.fail(e))?;
    for r in &adf_rows {
        let f = |v: Option<f64>, p: usize| v.map_or(String::new(), |v| format!("{v:.p$}"));
        w.write_record([
            r.variable.clone(),
            format!("{:?}", r.transform),
            r.differences.to_string(),
            f(r.statistic, 3),
            f(r.p_value, 4),
            r.lags.map_or(String::new(), |l| l.to_string()),
            r.nobs.to_string(),
            r.stationary.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;
    ctx.write_json("adf.json", &adf_rows)?;
    let refs: Vec<&WeeklySeries> = stationary.iter().collect();
    write_weekly_csv(ctx.create("stationary.csv")?, &refs).map_err(|e| ctx.fail(e))?;

    let target = find(ctx, &transformed, &ctx.cfg.variables.target)?;
    let (mpe_labels, rate_labels) = read_regimes(ctx)?;
    let mut w = csv_writer(ctx.create("regime_tests.csv")?);
    w.write_record(["Partition", "Kruskal-Wallis H", "KW p-value", "Levene W", "Levene p-value", "Max Tail Risk (q5)", "Tail regime"])
        .map_err(|e| ctx.fail(e))?;
    let mut results = BTreeMap::new();
    let partitions = [("MPE".to_string(), &mpe_labels), (ctx.cfg.variables.rate.clone(), &rate_labels)];
    for (name, labels) in partitions {
        match regime_distribution_tests(target, labels) {
            Ok(r) => {
                regime_rows(&mut w, &name, &r).map_err(|e| ctx.fail(e))?;
                results.insert(name, json!(r));
            }
            Err(e) => {
                log::warn!("regime tests for {name}: {e}");
                results.insert(name, json!({ "error": e.to_string() }));
            }
        }
    }
    w.flush().map_err(|e| ctx.fail(e))?;
    ctx.write_json("regime_tests.json", &results)
}

pub fn granger(ctx: &StageContext) -> Result<()> {
    let series = load_weekly(ctx, Stage::Stats, "stationary.csv")?;
    let target = find(ctx, &series, &ctx.cfg.variables.target)?;
    let predictors: Vec<WeeklySeries> = series.iter().filter(|s| s.name() != target.name()).cloned().collect();
    let max_lag = ctx.cfg.granger.max_lag;
    let lags: Vec<usize> = (1..=max_lag).collect();
    let table = granger_lag_table(target, &predictors, &lags);
    table.write_csv(ctx.create("lag_table.csv")?).map_err(|e| ctx.fail(e))?;
    ctx.write_json("granger.json", &table)?;

    let mut w = csv_writer(ctx.create("aic_lags.csv")?);
    w.write_record(["predictor", "aic_lag", "p_value"]).map_err(|e| ctx.fail(e))?;
    for (p, row) in predictors.iter().zip(&table.rows) {
        let (_, cols) = align_contiguous(&[target, p]);
        let (lag, pv) = match select_lag_aic(&cols[0], &cols[1], max_lag) {
            Ok(l) => (l.to_string(), row.cells.get(l - 1).and_then(|c| c.p_value()).map_or(String::new(), |p| format!("{p:.4}"))),
            Err(e) => {
                log::warn!("AIC lag for {}: {e}", p.name());
                (String::new(), String::new())
            }
        };
        w.write_record([p.name().to_string(), lag, pv]).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))
}

pub fn vmd(ctx: &StageContext) -> Result<()> {
    let vc = &ctx.cfg.vmd;
    let series = load_weekly(ctx, Stage::Stats, "stationary.csv")?;
    let target = find(ctx, &series, &ctx.cfg.variables.target)?;
    let predictors: Vec<WeeklySeries> = series.iter().filter(|s| s.name() != target.name()).cloned().collect();
    let report = vmd_granger_scan(target, &predictors, &vc.decomposition, vc.max_lag, vc.alpha_level);
    report.write_csv(ctx.create("scan.csv")?).map_err(|e| ctx.fail(e))?;
    ctx.write_json("scan.json", &report)?;

    let mut w = csv_writer(ctx.create("imf_summary.csv")?);
    w.write_record(["series", "imf", "center_frequency", "bandwidth", "iterations", "note"]).map_err(|e| ctx.fail(e))?;
    for s in &series {
        let (dates, cols) = align_contiguous(&[s]);
        match vmd_decompose(&cols[0], &vc.decomposition) {
            Ok(r) => {
                write_imf_csv(ctx.create(&format!("imfs/{}.csv", s.name()))?, &dates, &r).map_err(|e| ctx.fail(e))?;
                for (k, (om, bw)) in r.omegas.iter().zip(&r.bandwidths).enumerate() {
                    w.write_record([
                        s.name().to_string(),
                        (k + 1).to_string(),
                        om.to_string(),
                        bw.to_string(),
                        r.iterations.to_string(),
                        String::new(),
                    ])
                    .map_err(|e| ctx.fail(e))?;
                }
            }
            Err(e) => {
                w.write_record([s.name().to_string(), String::new(), String::new(), String::new(), String::new(), e.to_string()])
                    .map_err(|e| ctx.fail(e))?;
            }
        }
    }
    w.flush().map_err(|e| ctx.fail(e))
}

/// Target plus every transformed variable as features, on their longest
/// common gap-free run.
pub(crate) fn load_dataset(ctx: &StageContext) -> Result<(Dataset, Vec<WeeklySeries>)> {
    let transformed = load_weekly(ctx, Stage::Stats, "transformed.csv")?;
    let target = find(ctx, &transformed, &ctx.cfg.variables.target)?;
    let refs: Vec<&WeeklySeries> = transformed.iter().collect();
    let ds = Dataset::from_series(target, &refs).map_err(|e| ctx.fail(e))?;
    Ok((ds, transformed))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub fold: usize,
    pub run: usize,
    pub target: String,
    pub feature_names: Vec<String>,
    pub n_features: usize,
    pub units: usize,
    pub lookback: usize,
    /// Scaling the model's inputs and target were trained under.
    pub scaler: Standardizer,
    pub theta: Vec<f64>,
}

pub(crate) fn checkpoint_name(fold: usize, run: usize) -> String {
    format!("checkpoints/fold{fold}_run{run}.json")
}

pub fn forecast(ctx: &StageContext) -> Result<()> {
    let (ds, _) = load_dataset(ctx)?;
    let cfg = ctx.cfg.forecast_config();
    log::info!("forecast: {} weeks x {} features", ds.len(), ds.n_features());
    let mut ens = walk_forward_ensemble(&ds, &cfg).map_err(|e| ctx.fail(e))?;

    ens.write_table_csv(ctx.create("runs.csv")?).map_err(|e| ctx.fail(e))?;
    let mut w = csv_writer(ctx.create("folds.csv")?);
    w.write_record([
        "Fold",
        "Train start",
        "Train end",
        "Train weeks",
        "Validation start",
        "Validation end",
        "Validation weeks",
        "Test start",
        "Test end",
        "Test weeks",
    ])
    .map_err(|e| ctx.fail(e))?;
    for fr in &ens.folds {
        let f = &fr.fold;
        w.write_record([
            f.fold_id.to_string(),
            f.train_dates.0.to_string(),
            f.train_dates.1.to_string(),
            f.train.len().to_string(),
            f.validation_dates.0.to_string(),
            f.validation_dates.1.to_string(),
            f.validation.len().to_string(),
            f.test_dates.0.to_string(),
            f.test_dates.1.to_string(),
            f.test.len().to_string(),
        ])
        .map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("trials.csv")?);
    w.write_record([
        "fold",
        "trial",
        "units",
        "dropout",
        "lookback",
        "learning_rate",
        "optimizer",
        "batch_size",
        "val_loss",
        "best_epoch",
        "error",
    ])
    .map_err(|e| ctx.fail(e))?;
    for fr in &ens.folds {
        for (i, t) in fr.search.trials.iter().enumerate() {
            let h = &t.hyperparams;
            w.write_record([
                fr.fold.fold_id.to_string(),
                i.to_string(),
                h.units.to_string(),
                h.dropout.to_string(),
                h.lookback.to_string(),
                h.learning_rate.to_string(),
                h.optimizer.name().to_string(),
                h.batch_size.to_string(),
                t.val_loss.map_or(String::new(), |v| v.to_string()),
                t.best_epoch.map_or(String::new(), |v| v.to_string()),
                t.error.clone().unwrap_or_default(),
            ])
            .map_err(|e| ctx.fail(e))?;
        }
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("predictions.csv")?);
    let mut header = vec!["fold".to_string(), "date".into(), "actual".into(), "ensemble".into()];
    header.extend((0..cfg.runs).map(|r| format!("run{}", r + 1)));
    w.write_record(&header).map_err(|e| ctx.fail(e))?;
    for fr in &ens.folds {
        for (i, d) in fr.test_dates.iter().enumerate() {
            let mut rec =
                vec![fr.fold.fold_id.to_string(), d.to_string(), fr.actual[i].to_string(), fr.ensemble_predictions[i].to_string()];
            rec.extend(
                (0..cfg.runs).map(|r| fr.models.iter().find(|m| m.run == r).map_or(String::new(), |m| m.predictions[i].to_string())),
            );
            w.write_record(&rec).map_err(|e| ctx.fail(e))?;
        }
    }
    w.flush().map_err(|e| ctx.fail(e))?;

    let mut rows: Vec<ComparisonRow> = Vec::new();
    let mut baseline_failures = Vec::new();
    for fr in &ens.folds {
        let f = &fr.fold;
        match compare_fold(f.fold_id, &ds.target, f.validation.end, f.test.clone(), &fr.ensemble_predictions) {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("fold {}: ARIMA baseline failed: {e}", f.fold_id);
                baseline_failures.push(json!({ "fold": f.fold_id, "error": e.to_string() }));
            }
        }
    }
    write_comparison_csv(ctx.create("comparison.csv")?, &rows).map_err(|e| ctx.fail(e))?;
    ctx.write_json("comparison.json", &json!({ "rows": rows, "failures": baseline_failures }))?;

    let folds: Vec<_> = ens
        .folds
        .iter()
        .map(|f| {
            json!({
                "fold": f.fold.fold_id,
                "ensemble_rmse": f.ensemble_rmse,
                "ensemble_mae": f.ensemble_mae,
                "mean_predictor_rmse": f.mean_predictor_rmse,
                "rmse_ratio": f.ensemble_rmse / f.mean_predictor_rmse,
                "best_hyperparams": f.search.best_hyperparams,
                "final_epochs": f.search.final_epochs,
                "median_run": f.median_run,
                "failed_runs": f.failures.len(),
            })
        })
        .collect();
    let (e, b) = (ens.mean_ensemble_rmse(), ens.mean_baseline_rmse());
    ctx.write_json(
        "summary.json",
        &json!({
            "weeks": ds.len(),
            "features": ds.feature_names,
            "mean_ensemble_rmse": e,
            "mean_predictor_rmse": b,
            "rmse_ratio": e / b,
            "folds": folds,
        }),
    )?;

    for fr in &mut ens.folds {
        let scaler = Standardizer::fit(&ds, 0..fr.fold.validation.end);
        for m in &mut fr.models {
            let ck = Checkpoint {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                fold: fr.fold.fold_id,
                run: m.run,
                target: ds.target_name.clone(),
                feature_names: ds.feature_names.clone(),
                n_features: m.params.n_features,
                units: m.params.units,
                lookback: fr.search.best_hyperparams.lookback,
                scaler: scaler.clone(),
                theta: std::mem::take(&mut m.params.theta),
            };
            ctx.write_json(&checkpoint_name(ck.fold, ck.run), &ck)?;
        }
    }
    ctx.write_json("ensemble.json", &ens)
}

pub(crate) fn load_checkpoint(ctx: &StageContext, fold: usize, run: usize) -> Result<Checkpoint> {
    let ck: Checkpoint = ctx.read_json(Stage::Forecast, &checkpoint_name(fold, run))?;
    if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
        return Err(ctx.fail(format!("checkpoint fold {fold} run {run}: unsupported format {} v{}", ck.format, ck.version)));
    }
    if ck.theta.len() != LstmParams::len_for(ck.n_features, ck.units) {
        return Err(ctx.fail(format!("checkpoint fold {fold} run {run}: parameter count does not match its shape")));
    }
    Ok(ck)
}

pub fn explain(ctx: &StageContext) -> Result<()> {
    let (ds, transformed) = load_dataset(ctx)?;
    let mut ens: EnsembleResult = ctx.read_json(Stage::Forecast, "ensemble.json")?;
    let mut checkpoints = Vec::new();
    for fr in &mut ens.folds {
        for m in &mut fr.models {
            let ck = load_checkpoint(ctx, fr.fold.fold_id, m.run)?;
            if ck.feature_names != ds.feature_names {
                return Err(ctx.fail("checkpoint features differ from the dataset"));
            }
            m.params = LstmParams { n_features: ck.n_features, units: ck.units, theta: ck.theta };
            let name = checkpoint_name(fr.fold.fold_id, m.run);
            let (sha, _) = sha256_file(&ctx.input(Stage::Forecast, &name)).map_err(|e| ctx.fail(e))?;
            checkpoints.push(json!({ "fold": fr.fold.fold_id, "run": m.run, "checkpoint": format!("forecast/{name}"), "sha256": sha }));
        }
    }
    let cfg = ctx.cfg.explain_config();
    let tensor = explain_ensemble(&ds, &ens, &cfg).map_err(|e| ctx.fail(e))?;
    tensor.write_csv(ctx.create("shap_values.csv")?).map_err(|e| ctx.fail(e))?;

    let mut w = csv_writer(ctx.create("shap_samples.csv")?);
    w.write_record([
        "fold",
        "run",
        "sample_date",
        "window_end",
        "base_value",
        "prediction",
        "additivity_residual",
        "coalitions",
        "exhaustive",
    ])
    .map_err(|e| ctx.fail(e))?;
    for s in tensor.sorted_samples() {
        w.write_record([
            s.fold.to_string(),
            s.run.to_string(),
            s.date.to_string(),
            s.window_end.to_string(),
            s.base_value.to_string(),
            s.prediction.to_string(),
            s.additivity_residual().to_string(),
            s.coalitions.to_string(),
            s.exhaustive.to_string(),
        ])
        .map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))?;
    ctx.write_json(
        "shap_meta.json",
        &json!({
            "feature_names": tensor.feature_names,
            "samples": tensor.samples.len(),
            "max_additivity_residual": tensor.max_additivity_residual(),
            "all_runs": cfg.all_runs,
            "max_instances": cfg.max_instances,
            "meta": tensor.meta,
            "checkpoints": checkpoints,
        }),
    )?;

    let tables: Vec<_> = [AggregateMode::Global, AggregateMode::FeatureLag, AggregateMode::TemporalProfile]
        .into_iter()
        .map(|m| aggregate_attributions(&tensor, m))
        .collect();
    for (t, name) in tables.iter().zip(["global_importance.csv", "feature_lag_importance.csv", "temporal_profile.csv"]) {
        t.write_csv(ctx.create(name)?, None).map_err(|e| ctx.fail(e))?;
    }
    ctx.write_json("importance.json", &tables)?;

    let v = &ctx.cfg.variables;
    let feature = find(ctx, &transformed, &v.interaction)?;
    let (_, rate_labels) = read_regimes(ctx)?;
    let rate_at: BTreeMap<NaiveDate, Regime> = rate_labels.into_iter().collect();
    let result =
        interaction_analysis(&tensor, &v.interaction, |d| feature.value_at(d), |d| rate_at.get(&d).copied()).map_err(|e| ctx.fail(e))?;
    result.write_points_csv(ctx.create("interaction_points.csv")?).map_err(|e| ctx.fail(e))?;
    result.write_slopes_csv(ctx.create("interaction_slopes.csv")?).map_err(|e| ctx.fail(e))?;
    ctx.write_json("interaction.json", &result)
}
