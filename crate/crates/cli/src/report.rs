//! Markdown report with the analysis tables and static SVG figures, each
//! figure accompanied by the CSV it was drawn from.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use nml_core::explain::{AggregateMode, ImportanceRow, ImportanceTable, InteractionResult};
use nml_core::messages::Regime;
use nml_core::series::WeeklySeries;

use crate::error::Result;
use crate::pipeline::StageContext;
use crate::stage::Stage;
use crate::stages::{find, load_weekly, read_regimes};
use crate::svg::{box_stats, padded_range, Canvas, Frame, Labels, PALETTE};

/// Rows of a figure's source data, header first.
type Table = Vec<Vec<String>>;

struct Figure {
    name: &'static str,
    caption: String,
    svg: String,
    data: Table,
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Markdown table from a CSV artifact, keeping at most `limit` data rows.
fn csv_table(path: &Path, limit: Option<usize>) -> std::result::Result<String, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(md_escape).collect();
    let mut out = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    let mut total = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        total += 1;
        if limit.is_none_or(|l| total <= l) {
            let cells: Vec<String> = rec.iter().map(md_escape).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
    }
    if let Some(l) = limit.filter(|l| total > *l) {
        let _ = writeln!(
            out,
            "\n_First {l} of {total} rows; the full table is in `{}`._",
            path.file_name().unwrap_or_default().to_string_lossy()
        );
    }
    if total == 0 {
        out.push_str("\n_No rows._\n");
    }
    Ok(out)
}

fn day(d: NaiveDate) -> f64 {
    d.num_days_from_ce() as f64
}

fn year_ticks(x: (f64, f64)) -> Labels {
    let from = NaiveDate::from_num_days_from_ce_opt(x.0.ceil() as i32).map_or(2000, |d| d.year());
    let to = NaiveDate::from_num_days_from_ce_opt(x.1.floor() as i32).map_or(2000, |d| d.year());
    let step = ((to - from) / 8 + 1).max(1);
    Labels::At(
        (from..=to + 1)
            .step_by(step as usize)
            .filter_map(|y| NaiveDate::from_ymd_opt(y, 1, 1))
            .map(|d| (day(d), d.year().to_string()))
            .filter(|(v, _)| *v >= x.0 && *v <= x.1)
            .collect(),
    )
}

/// Panel rectangles on a grid of `cols` columns.
fn grid(n: usize, cols: usize, w: f64, h: f64) -> (Canvas, Vec<(f64, f64, f64, f64)>) {
    let cols = cols.clamp(1, n.max(1));
    let rows = n.div_ceil(cols).max(1);
    let rects = (0..n).map(|i| ((i % cols) as f64 * w, (i / cols) as f64 * h, w, h)).collect();
    (Canvas::new(cols as f64 * w, rows as f64 * h), rects)
}

fn regime_color(r: Option<Regime>) -> &'static str {
    match r {
        Some(Regime::Falling) | Some(Regime::Dovish) => PALETTE[0],
        Some(Regime::Rising) | Some(Regime::Hawkish) => PALETTE[1],
        Some(Regime::Flat) | Some(Regime::NeutralRegime) => "#7f7f7f",
        None => "#000000",
    }
}

fn series_figure(target_raw: &WeeklySeries, target: &WeeklySeries, mpe: &WeeklySeries, rate: &WeeklySeries) -> Figure {
    let panels = [
        (format!("{} level", target_raw.name()), target_raw),
        (format!("{} weekly return", target.name()), target),
        ("MPE index".to_string(), mpe),
        (rate.name().to_string(), rate),
    ];
    let x = padded_range(panels.iter().flat_map(|(_, s)| s.dates().iter().map(|d| day(*d))));
    let (mut c, rects) = grid(panels.len(), 1, 900.0, 190.0);
    let mut data = vec![vec!["panel".into(), "date".into(), "value".into()]];
    for (i, ((title, s), rect)) in panels.iter().zip(rects).enumerate() {
        let pts: Vec<(f64, f64)> = s.present().map(|(d, v)| (day(d), v)).collect();
        let f = c.panel(rect, title, (x, padded_range(pts.iter().map(|p| p.1))), (year_ticks(x), Labels::Numeric), 64.0);
        c.polyline(&f, &pts, PALETTE[i % PALETTE.len()], 1.0);
        data.extend(s.present().map(|(d, v)| vec![title.clone(), d.to_string(), v.to_string()]));
    }
    Figure { name: "series", caption: "Target price and return, MPE index and policy rate".into(), svg: c.finish(), data }
}

struct EventPath {
    offsets: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    events: String,
}

fn event_figure(ctx: &StageContext) -> Result<Figure> {
    let path = ctx.input(Stage::Index, "event_study.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| ctx.fail(e))?;
    let mut groups: Vec<(String, EventPath)> = Vec::new();
    let mut data = vec![vec!["regime".into(), "offset".into(), "mean".into(), "sd".into(), "events".into()]];
    for r in rdr.records() {
        let r = r.map_err(|e| ctx.fail(e))?;
        let num = |i: usize| r.get(i).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        let name = r.get(0).unwrap_or("").to_string();
        if groups.last().is_none_or(|g| g.0 != name) {
            groups.push((name.clone(), EventPath { offsets: vec![], mean: vec![], sd: vec![], events: r.get(4).unwrap_or("").into() }));
        }
        let g = &mut groups.last_mut().expect("pushed").1;
        g.offsets.push(num(1));
        g.mean.push(num(2));
        g.sd.push(num(3));
        data.push(r.iter().map(str::to_string).collect());
    }
    let x = padded_range(groups.iter().flat_map(|g| g.1.offsets.clone()));
    let y = padded_range(groups.iter().flat_map(|(_, g)| g.mean.iter().zip(&g.sd).flat_map(|(m, s)| [m - s, m + s])));
    let mut c = Canvas::new(760.0, 380.0);
    let f = c.panel((0.0, 0.0, 620.0, 380.0), "MPE around policy announcements", (x, y), (Labels::Numeric, Labels::Numeric), 64.0);
    c.line((f.px(0.0), f.top), (f.px(0.0), f.top + f.height), "#555555", 1.0, Some("4 3"));
    let mut legend = Vec::new();
    for (name, g) in &groups {
        let color = regime_color(Regime::from_name(name));
        let lo: Vec<f64> = g.mean.iter().zip(&g.sd).map(|(m, s)| m - s).collect();
        let hi: Vec<f64> = g.mean.iter().zip(&g.sd).map(|(m, s)| m + s).collect();
        c.band(&f, &g.offsets, &lo, &hi, color);
        let pts: Vec<(f64, f64)> = g.offsets.iter().copied().zip(g.mean.iter().copied()).collect();
        c.polyline(&f, &pts, color, 2.0);
        legend.push((format!("{name} (n={})", g.events), color));
    }
    let entries: Vec<(&str, &str)> = legend.iter().map(|(l, c)| (l.as_str(), *c)).collect();
    c.legend(630.0, 40.0, &entries);
    Ok(Figure {
        name: "event_study",
        caption: "Mean MPE path in weeks around announcements, by pre-announcement regime (band: one sd)".into(),
        svg: c.finish(),
        data,
    })
}

fn regime_box_figure(target: &WeeklySeries, partitions: &[(String, Vec<(NaiveDate, Regime)>)]) -> Figure {
    let (mut c, rects) = grid(partitions.len(), 2, 420.0, 340.0);
    let mut data = vec![vec![
        "partition".into(),
        "regime".into(),
        "n".into(),
        "whisker_low".into(),
        "q1".into(),
        "median".into(),
        "q3".into(),
        "whisker_high".into(),
    ]];
    for ((name, labels), rect) in partitions.iter().zip(rects) {
        let mut groups: BTreeMap<Regime, Vec<f64>> = BTreeMap::new();
        for (d, r) in labels {
            if let Some(v) = target.value_at(*d) {
                groups.entry(*r).or_default().push(v);
            }
        }
        let all: Vec<f64> = groups.values().flatten().copied().collect();
        let y = padded_range(all.iter().copied());
        let cats: Vec<(f64, String)> =
            groups.iter().enumerate().map(|(i, (r, v))| (i as f64, format!("{} ({})", r.name(), v.len()))).collect();
        let x = (-0.6, groups.len() as f64 - 0.4);
        let f = c.panel(rect, &format!("{} returns by {name} regime", target.name()), (x, y), (Labels::At(cats), Labels::Numeric), 64.0);
        for (i, (r, v)) in groups.iter().enumerate() {
            let Some(b) = box_stats(v) else { continue };
            draw_box(&mut c, &f, i as f64, &b, regime_color(Some(*r)));
            let mut row = vec![name.clone(), r.name().to_string(), v.len().to_string()];
            row.extend(b.iter().map(|x| x.to_string()));
            data.push(row);
        }
    }
    Figure { name: "regime_returns", caption: "Weekly target returns across MPE and rate regimes".into(), svg: c.finish(), data }
}

fn draw_box(c: &mut Canvas, f: &Frame, x: f64, b: &[f64; 5], color: &str) {
    let (l, r) = (f.px(x - 0.25), f.px(x + 0.25));
    c.line((f.px(x), f.py(b[0])), (f.px(x), f.py(b[1])), "#333333", 1.0, None);
    c.line((f.px(x), f.py(b[3])), (f.px(x), f.py(b[4])), "#333333", 1.0, None);
    c.rect(l, f.py(b[3]), r - l, f.py(b[1]) - f.py(b[3]), color, 0.5);
    c.line((l, f.py(b[2])), (r, f.py(b[2])), "#000000", 2.0, None);
    for w in [b[0], b[4]] {
        c.line((f.px(x - 0.1), f.py(w)), (f.px(x + 0.1), f.py(w)), "#333333", 1.0, None);
    }
}

/// Horizontal bars with sd whiskers, one panel per fold plus the average.
fn importance_bars(table: &ImportanceTable, limit: usize, name: &'static str, caption: &str) -> Figure {
    let mut panels: Vec<(String, Vec<(String, f64, f64)>)> = table
        .folds
        .iter()
        .map(|f| {
            let mut rows: Vec<(String, f64, f64)> =
                table.rows.iter().filter_map(|r| r.folds.iter().find(|c| c.fold == *f).map(|c| (r.label(), c.mean, c.sd))).collect();
            rows.sort_by(|a, b| b.1.total_cmp(&a.1));
            rows.truncate(limit);
            (format!("Fold {f}"), rows)
        })
        .collect();
    panels.push(("Average".into(), table.rows.iter().take(limit).map(|r| (r.label(), r.mean, r.sd)).collect()));
    let (mut c, rects) = grid(panels.len(), 3, 420.0, 60.0 + 16.0 * limit as f64);
    let mut data = vec![vec!["panel".into(), "rank".into(), "label".into(), "mean_abs_shap".into(), "sd".into()]];
    for ((title, rows), rect) in panels.iter().zip(rects) {
        let n = rows.len() as f64;
        let xmax = rows.iter().map(|r| r.1 + r.2).fold(0.0, f64::max).max(1e-12) * 1.05;
        let labels = rows.iter().enumerate().map(|(i, r)| (n - 1.0 - i as f64, r.0.clone())).collect();
        let f = c.panel(rect, title, ((0.0, xmax), (-0.6, n - 0.4)), (Labels::Numeric, Labels::At(labels)), 120.0);
        for (i, (label, m, s)) in rows.iter().enumerate() {
            let y = n - 1.0 - i as f64;
            c.rect(f.px(0.0), f.py(y + 0.35), f.px(*m) - f.px(0.0), f.py(y - 0.35) - f.py(y + 0.35), PALETTE[0], 0.8);
            c.line((f.px(m - s), f.py(y)), (f.px(m + s), f.py(y)), "#333333", 1.0, None);
            data.push(vec![title.clone(), (i + 1).to_string(), label.clone(), m.to_string(), s.to_string()]);
        }
    }
    Figure { name, caption: caption.into(), svg: c.finish(), data }
}

/// Profile rows per feature in global-rank order.
fn profiles(table: &ImportanceTable) -> Vec<(String, Vec<&ImportanceRow>)> {
    let mut out: Vec<(String, Vec<&ImportanceRow>)> = Vec::new();
    for r in &table.rows {
        match out.last_mut() {
            Some((f, rows)) if *f == r.feature => rows.push(r),
            _ => out.push((r.feature.clone(), vec![r])),
        }
    }
    out
}

fn signature_figure(profile: &ImportanceTable, top: usize) -> Figure {
    let feats: Vec<_> = profiles(profile).into_iter().take(top).collect();
    let x = padded_range(feats.iter().flat_map(|(_, rows)| rows.iter().map(|r| r.lag.unwrap_or(0) as f64)));
    let y = padded_range(feats.iter().flat_map(|(_, rows)| rows.iter().map(|r| r.mean)).chain([0.0]));
    let mut c = Canvas::new(820.0, 380.0);
    let f = c.panel(
        (0.0, 0.0, 680.0, 380.0),
        "Mean |SHAP| by lag (weeks before the forecast week)",
        (x, y),
        (Labels::Numeric, Labels::Numeric),
        64.0,
    );
    let mut data = vec![vec!["feature".into(), "lag".into(), "mean_abs_shap".into(), "sd_across_folds".into()]];
    let mut legend = Vec::new();
    for (i, (name, rows)) in feats.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.lag.unwrap_or(0) as f64, r.mean)).collect();
        c.polyline(&f, &pts, color, 2.0);
        for (x, y) in &pts {
            c.circle(f.px(*x), f.py(*y), 2.5, color);
        }
        legend.push((name.clone(), color));
        data.extend(rows.iter().map(|r| vec![name.clone(), r.lag.unwrap_or(0).to_string(), r.mean.to_string(), r.sd.to_string()]));
    }
    let entries: Vec<(&str, &str)> = legend.iter().map(|(l, c)| (l.as_str(), *c)).collect();
    c.legend(690.0, 40.0, &entries);
    Figure { name: "temporal_signatures", caption: format!("Lag profiles of the top {top} features"), svg: c.finish(), data }
}

fn stability_figure(profile: &ImportanceTable, top: usize) -> Figure {
    let feats: Vec<_> = profiles(profile).into_iter().take(top).collect();
    let (mut c, rects) = grid(feats.len(), 5, 300.0, 220.0);
    let mut data = vec![vec!["feature".into(), "lag".into(), "fold".into(), "mean_abs_shap".into()]];
    for ((name, rows), rect) in feats.iter().zip(rects) {
        let lags: Vec<f64> = rows.iter().map(|r| r.lag.unwrap_or(0) as f64).collect();
        let lo: Vec<f64> = rows.iter().map(|r| r.mean - r.sd).collect();
        let hi: Vec<f64> = rows.iter().map(|r| r.mean + r.sd).collect();
        let y = padded_range(lo.iter().chain(&hi).copied());
        let f = c.panel(rect, name, (padded_range(lags.iter().copied()), y), (Labels::Numeric, Labels::Numeric), 56.0);
        c.band(&f, &lags, &lo, &hi, PALETTE[0]);
        let pts: Vec<(f64, f64)> = lags.iter().copied().zip(rows.iter().map(|r| r.mean)).collect();
        c.polyline(&f, &pts, PALETTE[0], 2.0);
        for r in rows {
            for cell in &r.folds {
                data.push(vec![name.clone(), r.lag.unwrap_or(0).to_string(), cell.fold.to_string(), cell.mean.to_string()]);
            }
        }
    }
    Figure {
        name: "temporal_stability",
        caption: format!("Lag profiles of the top {top} features with the spread across folds (band: one sd)"),
        svg: c.finish(),
        data,
    }
}

fn interaction_figure(res: &InteractionResult) -> Figure {
    let (mut c, rects) = grid(res.scopes.len(), 3, 400.0, 320.0);
    let mut data = vec![vec!["scope".into(), "date".into(), "value".into(), "regime".into(), "phi_mean".into(), "phi_sd".into()]];
    for (scope, rect) in res.scopes.iter().zip(rects) {
        let title = scope.fold.map_or("All folds".to_string(), |f| format!("Fold {f}"));
        let pts: Vec<_> = res.points.iter().filter(|p| scope.fold.is_none_or(|f| p.fold == f)).collect();
        let x = padded_range(pts.iter().map(|p| p.value));
        let y = padded_range(pts.iter().flat_map(|p| [p.phi_mean - p.phi_sd, p.phi_mean + p.phi_sd]));
        let f = c.panel(rect, &title, (x, y), (Labels::Numeric, Labels::Numeric), 64.0);
        for p in &pts {
            let color = regime_color(p.regime);
            c.line((f.px(p.value), f.py(p.phi_mean - p.phi_sd)), (f.px(p.value), f.py(p.phi_mean + p.phi_sd)), color, 0.8, None);
            c.circle(f.px(p.value), f.py(p.phi_mean), 2.5, color);
            data.push(vec![
                title.clone(),
                p.date.to_string(),
                p.value.to_string(),
                p.regime.map_or(String::new(), |r| r.name().to_string()),
                p.phi_mean.to_string(),
                p.phi_sd.to_string(),
            ]);
        }
        for s in scope.fits.slopes.iter().filter(|s| s.display) {
            let xs: Vec<f64> = pts.iter().filter(|p| s.regime.is_none() || p.regime == s.regime).map(|p| p.value).collect();
            let (a, b) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            let line = |v: f64| s.intercept + s.slope * v;
            let dash = s.regime.is_none().then_some("5 3");
            c.line((f.px(a), f.py(line(a))), (f.px(b), f.py(line(b))), regime_color(s.regime), 1.8, dash);
        }
    }
    Figure {
        name: "interaction",
        caption: format!(
            "{} attribution against its value, coloured by rate regime (blue falling, grey flat, red rising); lines shown where p < 0.01, dashed for all regimes pooled",
            res.feature
        ),
        svg: c.finish(),
        data,
    }
}

fn write_figure(ctx: &StageContext, fig: &Figure) -> Result<()> {
    ctx.write_text(&format!("figures/{}.svg", fig.name), &fig.svg)?;
    let mut w = csv::Writer::from_writer(ctx.create(&format!("figures/{}.csv", fig.name))?);
    for row in &fig.data {
        w.write_record(row).map_err(|e| ctx.fail(e))?;
    }
    w.flush().map_err(|e| ctx.fail(e))
}

pub fn report(ctx: &StageContext) -> Result<()> {
    let v = &ctx.cfg.variables;
    let macro_weekly = load_weekly(ctx, Stage::Ingest, "macro_weekly.csv")?;
    let transformed = load_weekly(ctx, Stage::Stats, "transformed.csv")?;
    let mpe = load_weekly(ctx, Stage::Index, "mpe.csv")?;
    let target_raw = find(ctx, &macro_weekly, &v.target)?;
    let rate = find(ctx, &macro_weekly, &v.rate)?;
    let target = find(ctx, &transformed, &v.target)?;
    let mpe = find(ctx, &mpe, "MPE")?;
    let (mpe_labels, rate_labels) = read_regimes(ctx)?;
    let tables: Vec<ImportanceTable> = ctx.read_json(Stage::Explain, "importance.json")?;
    let table =
        |mode: AggregateMode| tables.iter().find(|t| t.mode == mode).ok_or_else(|| ctx.fail(format!("importance table {mode:?} missing")));
    let interaction: InteractionResult = ctx.read_json(Stage::Explain, "interaction.json")?;
    let forecast: serde_json::Value = ctx.read_json(Stage::Forecast, "summary.json")?;
    let shap: serde_json::Value = ctx.read_json(Stage::Explain, "shap_meta.json")?;

    let figures = vec![
        series_figure(target_raw, target, mpe, rate),
        event_figure(ctx)?,
        regime_box_figure(target, &[("MPE".into(), mpe_labels), (v.rate.clone(), rate_labels)]),
        importance_bars(
            table(AggregateMode::Global)?,
            19,
            "shap_global",
            "Mean |SHAP| per feature, by fold and averaged (whiskers: one sd across runs)",
        ),
        importance_bars(
            table(AggregateMode::FeatureLag)?,
            20,
            "shap_feature_lag",
            "Top 20 feature-lag pairs by mean |SHAP|, by fold and averaged",
        ),
        signature_figure(table(AggregateMode::TemporalProfile)?, 5),
        stability_figure(table(AggregateMode::TemporalProfile)?, 10),
        interaction_figure(&interaction),
    ];
    for f in &figures {
        write_figure(ctx, f)?;
    }

    let tab = |stage: Stage, name: &str, limit: Option<usize>| csv_table(&ctx.input(stage, name), limit).map_err(|e| ctx.fail(e));
    let fig = |name: &str| {
        let f = figures.iter().find(|f| f.name == name).expect("figure rendered");
        format!("![{}](figures/{}.svg)\n\n_{}. Data: `figures/{}.csv`._\n", f.caption, f.name, f.caption, f.name)
    };
    let num = |v: &serde_json::Value, key: &str| v.get(key).and_then(|x| x.as_f64()).map_or("n/a".to_string(), |x| format!("{x:.4}"));

    let mut md = String::new();
    let _ = writeln!(md, "# Monetary policy expectations and {} returns\n", v.target);
    let _ = writeln!(md, "Seed {}. Every number below is read from the stage artifacts next to this report.\n", ctx.cfg.seed);
    let _ = writeln!(md, "## Series\n\n{}", fig("series"));
    let _ = writeln!(md, "## Message classification\n\n{}", tab(Stage::Classify, "stance_summary.csv", None)?);
    let _ = writeln!(md, "## Announcement event study\n\n{}", fig("event_study"));
    let _ = writeln!(md, "## Descriptive statistics\n\n{}", tab(Stage::Stats, "summary.csv", None)?);
    let _ = writeln!(md, "## Correlations\n\n{}", tab(Stage::Stats, "correlations.csv", None)?);
    let _ = writeln!(md, "## Returns across regimes\n\n{}\n{}", tab(Stage::Stats, "regime_tests.csv", None)?, fig("regime_returns"));
    let _ = writeln!(md, "## Unit-root tests\n\n{}", tab(Stage::Stats, "adf.csv", None)?);
    let _ = writeln!(
        md,
        "## Granger causality\n\nSSR F-test p-values for each predictor against {} (`**` p < 0.05, `*` p < 0.10).\n\n{}",
        v.target,
        tab(Stage::Granger, "lag_table.csv", None)?
    );
    let _ = writeln!(
        md,
        "## Granger causality between VMD modes\n\nSignificant (target IMF, predictor IMF, lag) cells; predictors are labelled `Name(imf,lag)`.\n\n{}",
        tab(Stage::Vmd, "scan.csv", Some(60))?
    );
    let _ = writeln!(
        md,
        "## Forecasting runs\n\nEnsemble RMSE {} against {} for the train-mean predictor (ratio {}).\n\n{}\n### Walk-forward folds\n\n{}",
        num(&forecast, "mean_ensemble_rmse"),
        num(&forecast, "mean_predictor_rmse"),
        num(&forecast, "rmse_ratio"),
        tab(Stage::Forecast, "runs.csv", None)?,
        tab(Stage::Forecast, "folds.csv", None)?
    );
    let _ = writeln!(md, "## LSTM ensemble against ARIMA\n\n{}", tab(Stage::Forecast, "comparison.csv", None)?);
    let _ = writeln!(
        md,
        "## Global feature importance\n\nMean |SHAP| on the standardized target scale; sd in parentheses. Largest additivity residual over {} explained windows: {}.\n\n{}\n{}",
        shap.get("samples").and_then(|x| x.as_u64()).unwrap_or(0),
        shap.get("max_additivity_residual").and_then(|x| x.as_f64()).map_or("n/a".into(), |x| format!("{x:.2e}")),
        tab(Stage::Explain, "global_importance.csv", None)?,
        fig("shap_global")
    );
    let _ = writeln!(
        md,
        "## Feature-lag importance\n\n{}\n{}",
        tab(Stage::Explain, "feature_lag_importance.csv", Some(20))?,
        fig("shap_feature_lag")
    );
    let _ = writeln!(md, "## Temporal profiles\n\n{}\n{}", fig("temporal_signatures"), fig("temporal_stability"));
    let _ = writeln!(
        md,
        "## {} attribution by rate regime\n\n{}\n{}",
        interaction.feature,
        tab(Stage::Explain, "interaction_slopes.csv", None)?,
        fig("interaction")
    );
    ctx.write_text("report.md", &md)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markdown_table_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "a,b\n1,x|y\n2,z\n3,w\n").unwrap();
        let md = csv_table(&p, Some(2)).unwrap();
        assert!(md.starts_with("| a | b |\n|---|---|\n| 1 | x\\|y |\n| 2 | z |\n"));
        assert!(md.contains("First 2 of 3 rows"));
    }

    #[test]
    fn year_ticks_fall_inside_range() {
        let a = day(NaiveDate::from_ymd_opt(2015, 3, 1).unwrap());
        let b = day(NaiveDate::from_ymd_opt(2018, 6, 1).unwrap());
        let Labels::At(t) = year_ticks((a, b)) else { panic!() };
        let years: Vec<&str> = t.iter().map(|x| x.1.as_str()).collect();
        assert_eq!(years, vec!["2016", "2017", "2018"]);
    }
}
