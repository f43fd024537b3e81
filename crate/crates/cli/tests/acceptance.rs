//! Acceptance checks: one PASS/FAIL line per criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use nml::synthetic::{gen_synthetic, SyntheticOptions, Truth};
use nml::{run_pipeline, PipelineConfig, Stage};
use nml_core::baseline::{diebold_mariano, fit_arima, select_arima_aic, ArimaOrder};
use nml_core::causality::granger_ftest;
use nml_core::explain::{exact_shapley, interaction_by_regime, kernel_shap};
use nml_core::forecasting::LstmParams;
use nml_core::messages::{build_mpe_weekly, partition_regime, ClassifiedMessage, RawMessage, Regime, RegimeMode, Source, Stance};
use nml_core::series::WeeklySeries;
use nml_core::stat_tests::{adf_test, schwert_max_lag};
use nml_core::vmd::{vmd_decompose, VmdConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = (bool, String);

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn seeded(label: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(label.wrapping_mul(1_000_003).wrapping_add(seed))
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn vmd_two_tone() -> Outcome {
    let start = Instant::now();
    let n = 1024;
    let (f1, f2) = (0.02, 0.2);
    let tone = |f: f64| (0..n).map(|t| (2.0 * std::f64::consts::PI * f * t as f64).sin()).collect::<Vec<f64>>();
    let (a, b) = (tone(f1), tone(f2));
    let signal: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let r = match vmd_decompose(&signal, &VmdConfig { k: 2, ..VmdConfig::default() }) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let errs = [(r.omegas[0] - f1).abs() / f1, (r.omegas[1] - f2).abs() / f2];
    let corrs = [corr(&r.modes[0], &a), corr(&r.modes[1], &b)];
    let ok = errs.iter().all(|e| *e < 0.05) && corrs.iter().all(|c| *c >= 0.95) && elapsed < Duration::from_secs(5);
    (
        ok,
        format!(
            "omegas {:.5}, {:.5} (rel. err {:.2e}, {:.2e}); corr {:.4}, {:.4}; {:.2}s",
            r.omegas[0],
            r.omegas[1],
            errs[0],
            errs[1],
            corrs[0],
            corrs[1],
            elapsed.as_secs_f64()
        ),
    )
}

fn granger_calibration() -> Outcome {
    let start = Instant::now();
    let n = 500;
    let mut rejected = 0;
    for seed in 0..2000 {
        let mut rng = seeded(1, seed);
        let (x, y) = (noise(&mut rng, n), noise(&mut rng, n));
        if granger_ftest(&y, &x, 1).map(|g| g.p_value < 0.05).unwrap_or(false) {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / 2000.0;
    let mut detected = 0;
    for seed in 0..200 {
        let mut rng = seeded(2, seed);
        let x = noise(&mut rng, n);
        let e = noise(&mut rng, n);
        let y: Vec<f64> = (0..n).map(|t| if t >= 3 { x[t - 3] } else { 0.0 } + 0.1 * e[t]).collect();
        if granger_ftest(&y, &x, 3).map(|g| g.p_value < 0.01).unwrap_or(false) {
            detected += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = (0.03..=0.07).contains(&rate) && detected >= 198 && elapsed < Duration::from_secs(120);
    (ok, format!("null rejection {:.2}% of 2000; lag-3 detection {detected}/200; {:.1}s", 100.0 * rate, elapsed.as_secs_f64()))
}

fn adf_calibration() -> Outcome {
    let n = 500;
    let lag = schwert_max_lag(n);
    let (mut walk_kept, mut noise_rejected) = (0, 0);
    for seed in 0..1000 {
        let mut rng = seeded(3, seed);
        let e = noise(&mut rng, n);
        let walk: Vec<f64> = e
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        if adf_test(&walk, lag).map(|r| r.p_value >= 0.05).unwrap_or(false) {
            walk_kept += 1;
        }
        let white = noise(&mut rng, n);
        if adf_test(&white, lag).map(|r| r.p_value < 0.05).unwrap_or(false) {
            noise_rejected += 1;
        }
    }
    let ok = walk_kept >= 900 && noise_rejected >= 950;
    (ok, format!("random walk not rejected {walk_kept}/1000; white noise rejected {noise_rejected}/1000"))
}

fn lstm_gradient() -> Outcome {
    let (n, u, l) = (2, 2, 3);
    let mut rng = seeded(4, 0);
    let mut p = LstmParams::init(n, u, &mut rng);
    for t in p.theta.iter_mut() {
        *t += rng.gen_range(-0.5..0.5);
    }
    let window: Vec<f64> = (0..l * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let (_, grad) = match p.output_gradient(&window, l) {
        Ok(g) => g,
        Err(e) => return (false, e.to_string()),
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..p.theta.len() {
        let mut plus = p.clone();
        plus.theta[j] += h;
        let mut minus = p.clone();
        minus.theta[j] -= h;
        let fd = (plus.predict(&window, l).unwrap() - minus.predict(&window, l).unwrap()) / (2.0 * h);
        let denom = fd.abs().max(grad[j].abs()).max(1e-8);
        worst = worst.max((fd - grad[j]).abs() / denom);
    }
    (worst <= 1e-4, format!("{} parameters; max relative error {worst:.2e}", p.theta.len()))
}

fn lstm_learnability(run: &E2e) -> Outcome {
    let ratio = run.forecast_summary["rmse_ratio"].as_f64().unwrap_or(f64::NAN);
    let ok = ratio <= 0.5 && run.forecast_seconds < 1800.0;
    (
        ok,
        format!(
            "ensemble RMSE {:.5} vs mean predictor {:.5} (ratio {ratio:.3}); search and training {:.0}s",
            run.forecast_summary["mean_ensemble_rmse"].as_f64().unwrap_or(f64::NAN),
            run.forecast_summary["mean_predictor_rmse"].as_f64().unwrap_or(f64::NAN),
            run.forecast_seconds
        ),
    )
}

fn kernel_shap_exactness() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    let mut worst_linear: f64 = 0.0;
    let mut worst_additivity: f64 = 0.0;
    for m in [3usize, 6, 9, 12] {
        let mut rng = seeded(5, m as u64);
        let w = noise(&mut rng, m);
        let mut model = |x: &[f64]| {
            x.chunks(m)
                .map(|r| {
                    let lin: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
                    lin.tanh() + r[0] * r[m - 1] - 0.3 * r[1] * r[2].sin()
                })
                .collect::<Vec<f64>>()
        };
        let background = noise(&mut rng, 8 * m);
        let instance = noise(&mut rng, m);
        let exact = exact_shapley(&mut model, &background, &instance).unwrap();
        let approx = kernel_shap(&mut model, &background, &instance, 1 << m, &mut rng).unwrap();
        for (a, b) in approx.phi.iter().zip(&exact.phi) {
            worst_exact = worst_exact.max((a - b).abs());
        }
        worst_additivity = worst_additivity.max(approx.additivity_residual());
    }
    for (m, nsamples) in [(8usize, 256usize), (20, 400), (40, 600)] {
        let mut rng = seeded(6, m as u64);
        let w = noise(&mut rng, m);
        let b0 = 0.7;
        let mut model = |x: &[f64]| x.chunks(m).map(|r| b0 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect::<Vec<f64>>();
        let background = noise(&mut rng, 10 * m);
        let instance = noise(&mut rng, m);
        let e = kernel_shap(&mut model, &background, &instance, nsamples, &mut rng).unwrap();
        for i in 0..m {
            let mean = background.chunks(m).map(|r| r[i]).sum::<f64>() / 10.0;
            worst_linear = worst_linear.max((e.phi[i] - w[i] * (instance[i] - mean)).abs());
        }
        worst_additivity = worst_additivity.max(e.additivity_residual());
    }
    let ok = worst_exact <= 1e-4 && worst_linear <= 1e-6 && worst_additivity <= 1e-4;
    (
        ok,
        format!(
            "vs enumeration (M<=12) {worst_exact:.1e}; vs linear closed form (M<=40) {worst_linear:.1e}; additivity {worst_additivity:.1e}"
        ),
    )
}

fn diebold_mariano_checks() -> Outcome {
    let mut rejected = 0;
    for seed in 0..2000 {
        let mut rng = seeded(7, seed);
        let (e1, e2) = (noise(&mut rng, 100), noise(&mut rng, 100));
        if diebold_mariano(&e1, &e2, 1).map(|r| r.p_value < 0.05).unwrap_or(false) {
            rejected += 1;
        }
    }
    let rate = rejected as f64 / 2000.0;
    let (mut detected, mut antisymmetric) = (0, true);
    for seed in 0..200 {
        let mut rng = seeded(8, seed);
        let e1 = noise(&mut rng, 200);
        let e2: Vec<f64> = noise(&mut rng, 200).iter().map(|v| v * 2f64.sqrt()).collect();
        let (a, b) = (diebold_mariano(&e1, &e2, 1).unwrap(), diebold_mariano(&e2, &e1, 1).unwrap());
        antisymmetric &= a.statistic == -b.statistic && a.p_value == b.p_value;
        let h = diebold_mariano(&e1, &e2, 4).unwrap();
        antisymmetric &= h.statistic == -diebold_mariano(&e2, &e1, 4).unwrap().statistic;
        if a.p_value < 0.01 {
            detected += 1;
        }
    }
    let ok = (0.03..=0.07).contains(&rate) && detected >= 190 && antisymmetric;
    (ok, format!("null rejection {:.2}% of 2000; dominated detected {detected}/200; antisymmetry exact: {antisymmetric}", 100.0 * rate))
}

fn ar_sim(phi: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e = noise(rng, n + 200);
    let mut x = vec![0.0; n + 200];
    for t in phi.len()..x.len() {
        x[t] = e[t] + phi.iter().enumerate().map(|(i, a)| a * x[t - 1 - i]).sum::<f64>();
    }
    x[200..].to_vec()
}

fn arima_recovery() -> Outcome {
    let mut picked = 0;
    for seed in 0..200 {
        let mut rng = seeded(9, seed);
        let x = ar_sim(&[0.5, -0.3], 1000, &mut rng);
        if let Ok(sel) = select_arima_aic(&x, 3, 1, 3) {
            if sel.fit.order.p == 2 && sel.fit.order.q == 0 {
                picked += 1;
            }
        }
    }
    let mut within = 0;
    for seed in 0..200 {
        let mut rng = seeded(10, seed);
        let x = ar_sim(&[0.6], 1000, &mut rng);
        if fit_arima(&x, ArimaOrder::new(1, 0, 0)).map(|f| (f.ar[0] - 0.6).abs() <= 0.07).unwrap_or(false) {
            within += 1;
        }
    }
    let ok = picked >= 120 && within >= 190;
    (ok, format!("AR(2) selected as p=2,q=0 in {picked}/200; AR(1) estimate within 0.07 in {within}/200"))
}

fn message(day: u32, stance: i64, likes: u64, reshares: u64) -> ClassifiedMessage {
    let at = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap().and_hms_opt(9, 0, 0).unwrap() + chrono::Duration::days(day as i64);
    ClassifiedMessage {
        message: RawMessage { id: format!("m{day}-{stance}-{likes}"), created_at: at, body: String::new(), likes, reshares },
        stance: Stance::from_value(stance).unwrap(),
        source: Source::Lexicon,
    }
}

fn mpe_index_examples() -> Outcome {
    let mut fails = Vec::new();
    let third = build_mpe_weekly(&[message(0, -1, 1, 0), message(1, 1, 0, 0)]).unwrap().series.values()[0];
    if third != -1.0 / 3.0 {
        fails.push(format!("weighted average {third}"));
    }
    let neutral = build_mpe_weekly(&[message(0, 0, 5, 2), message(2, 0, 0, 0)]).unwrap().series.values()[0];
    let single = build_mpe_weekly(&[message(1, 2, 17, 4)]).unwrap().series.values()[0];
    if neutral != 0.0 || single != 2.0 {
        fails.push(format!("neutral {neutral}, single {single}"));
    }
    let levels = [
        (0.02, Regime::Dovish),
        (0.0, Regime::NeutralRegime),
        (0.01, Regime::NeutralRegime),
        (-0.01, Regime::NeutralRegime),
        (-0.2, Regime::Hawkish),
        (0.0101, Regime::Dovish),
    ];
    for (v, want) in levels {
        if Regime::of_level(v) != want {
            fails.push(format!("level {v}"));
        }
    }
    let start = NaiveDate::from_ymd_opt(2024, 3, 8).unwrap();
    let dates: Vec<NaiveDate> = (0..4).map(|i| start + chrono::Duration::weeks(i)).collect();
    let rate = WeeklySeries::new("FFR", dates, vec![1.0, 1.0, 1.25, 1.0]).unwrap();
    let labels: Vec<Regime> = partition_regime(&rate, RegimeMode::Rate).into_iter().map(|(_, r)| r).collect();
    if labels != [Regime::Flat, Regime::Rising, Regime::Falling] {
        fails.push(format!("rate regimes {labels:?}"));
    }
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let mut rng = seeded(11, seed);
        let msgs: Vec<ClassifiedMessage> =
            (0..40).map(|_| message(rng.gen_range(0..28), rng.gen_range(-2..=2), rng.gen_range(0..40), rng.gen_range(0..10))).collect();
        let k = rng.gen_range(2..10u64);
        let scaled: Vec<ClassifiedMessage> = msgs
            .iter()
            .map(|c| {
                let mut c = c.clone();
                c.message.likes = k * c.message.weight() as u64 - 1;
                c.message.reshares = 0;
                c
            })
            .collect();
        let (a, b) = (build_mpe_weekly(&msgs).unwrap().series, build_mpe_weekly(&scaled).unwrap().series);
        for (x, y) in a.values().iter().zip(b.values()) {
            if x.is_finite() || y.is_finite() {
                worst = worst.max((x - y).abs());
            }
        }
    }
    if worst > 1e-12 {
        fails.push(format!("scale invariance {worst:e}"));
    }
    let ok = fails.is_empty();
    let detail = if ok {
        format!("-1/3 fixture exact; threshold and rate fixtures exact; weight-scale deviation {worst:.1e}")
    } else {
        fails.join("; ")
    };
    (ok, detail)
}

fn interaction_checks() -> Outcome {
    let regimes_for =
        |rng: &mut ChaCha8Rng, n: usize| -> Vec<Option<Regime>> { (0..n).map(|_| Some(Regime::RATE[rng.gen_range(0..3)])).collect() };
    let mut rng = seeded(12, 0);
    let n = 52;
    let value = noise(&mut rng, n);
    let jitter = noise(&mut rng, n);
    let phi: Vec<f64> = value.iter().zip(&jitter).map(|(v, e)| 2.0 * v + 1e-4 * e).collect();
    let regimes = regimes_for(&mut rng, n);
    let fits = interaction_by_regime(&value, &phi, &regimes).unwrap();
    let pooled = fits.slopes.iter().find(|s| s.regime.is_none()).unwrap();
    let planted =
        (1.9..=2.1).contains(&pooled.slope) && pooled.display && fits.slopes.iter().all(|s| (1.9..=2.1).contains(&s.slope) && s.display);
    let mut quiet = 0;
    for seed in 0..1000 {
        let mut rng = seeded(13, seed);
        let (value, phi) = (noise(&mut rng, 50), noise(&mut rng, 50));
        let regimes = regimes_for(&mut rng, 50);
        let fits = interaction_by_regime(&value, &phi, &regimes).unwrap();
        if !fits.slopes.iter().find(|s| s.regime.is_none()).unwrap().display {
            quiet += 1;
        }
    }
    let ok = planted && quiet >= 950;
    (
        ok,
        format!(
            "planted slope {:.4} (p {:.1e}, display {}); independent noise hidden in {quiet}/1000",
            pooled.slope, pooled.p_value, pooled.display
        ),
    )
}

struct E2e {
    _dir: tempfile::TempDir,
    cfg: PipelineConfig,
    truth: Truth,
    error: Option<String>,
    forecast_seconds: f64,
    forecast_summary: serde_json::Value,
}

fn run_e2e() -> E2e {
    let dir = tempfile::tempdir().expect("temp dir");
    let data = gen_synthetic(&SyntheticOptions::new(42)).expect("synthetic data");
    data.write(dir.path()).expect("write synthetic data");
    let cfg = PipelineConfig::load(&dir.path().join("nml.toml")).expect("synthetic config");
    let mut run =
        E2e { _dir: dir, cfg, truth: data.truth, error: None, forecast_seconds: f64::NAN, forecast_summary: serde_json::Value::Null };
    match run_pipeline(&run.cfg, &Stage::ALL, false) {
        Ok(outcomes) => {
            run.forecast_seconds = outcomes.iter().find(|o| o.stage == Stage::Forecast).map_or(f64::NAN, |o| o.seconds);
            run.forecast_summary = read_json(&run.cfg.output_dir.join("forecast/summary.json")).unwrap_or_default();
        }
        Err(e) => run.error = Some(e.to_string()),
    }
    run
}

fn read_json(path: &Path) -> Option<serde_json::Value> {
    serde_json::from_slice(&std::fs::read(path).ok()?).ok()
}

/// Every file under `dir`, with manifest completion times blanked.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).expect("readable dir") {
            let p = e.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = std::fs::read(&p).expect("readable file");
            if p.file_name().is_some_and(|n| n == "manifest.json") {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).expect("manifest json");
                v["created_at"] = serde_json::Value::Null;
                bytes = serde_json::to_vec(&v).expect("manifest json");
            }
            out.insert(p.strip_prefix(dir).expect("inside dir").to_path_buf(), bytes);
        }
    }
    out
}

fn end_to_end(run: &E2e) -> Outcome {
    if let Some(e) = &run.error {
        return (false, format!("pipeline failed: {e}"));
    }
    let out = &run.cfg.output_dir;
    let mut fails = Vec::new();
    let manifests = Stage::ALL.iter().filter(|s| out.join(s.name()).join("manifest.json").is_file()).count();
    if manifests != Stage::ALL.len() || !out.join("report/report.md").is_file() {
        fails.push(format!("{manifests}/9 manifests"));
    }

    let granger = read_json(&out.join("granger/granger.json")).unwrap_or_default();
    let lag3 = granger["rows"]
        .as_array()
        .and_then(|rows| rows.iter().find(|r| r["predictor"] == "MPE"))
        .and_then(|r| r["cells"].as_array()?.iter().find(|c| c["lag"] == 3)?["p_value"].as_f64())
        .unwrap_or(f64::NAN);
    if !(lag3 < 0.01) {
        fails.push(format!("MPE lag-3 Granger p {lag3}"));
    }

    let scan = read_json(&out.join("vmd/scan.json")).unwrap_or_default();
    let driver_hits: Vec<&serde_json::Value> =
        scan["hits"].as_array().map(|h| h.iter().filter(|h| h["predictor"] == run.truth.mid_driver.as_str()).collect()).unwrap_or_default();
    let strongest = driver_hits.iter().max_by(|a, b| a["f_stat"].as_f64().unwrap_or(0.0).total_cmp(&b["f_stat"].as_f64().unwrap_or(0.0)));
    let strongest_imf = strongest.and_then(|h| h["target_imf"].as_u64());
    if strongest_imf != Some(run.truth.mid_target_imf as u64) {
        fails.push(format!("strongest {} hit on target IMF {strongest_imf:?}", run.truth.mid_driver));
    }

    let mut top = Vec::new();
    if let Ok(mut r) = csv::Reader::from_path(out.join("explain/global_importance.csv")) {
        top = r.records().filter_map(|r| r.ok()).take(3).map(|r| r[0].to_string()).collect();
    }
    if !top.iter().any(|v| v == "MPE") {
        fails.push(format!("SHAP top 3 {top:?}"));
    }

    let interaction = read_json(&out.join("explain/interaction.json")).unwrap_or_default();
    let shown = interaction["scopes"]
        .as_array()
        .map(|s| {
            s.iter().flat_map(|s| s["fits"]["slopes"].as_array().cloned().unwrap_or_default()).filter(|f| f["display"] == true).count()
        })
        .unwrap_or(0);
    if shown == 0 {
        fails.push("no interaction slope displayed".into());
    }
    let residual = read_json(&out.join("explain/shap_meta.json")).and_then(|m| m["max_additivity_residual"].as_f64()).unwrap_or(f64::NAN);
    if !(residual <= 1e-4) {
        fails.push(format!("pipeline additivity residual {residual}"));
    }

    let first = snapshot(out);
    let identical = match run_pipeline(&run.cfg, &Stage::ALL, true) {
        Ok(_) => {
            let second = snapshot(out);
            let differing: Vec<String> =
                first.keys().chain(second.keys()).filter(|k| first.get(*k) != second.get(*k)).map(|k| k.display().to_string()).collect();
            if !differing.is_empty() {
                fails.push(format!("rerun differs in {differing:?}"));
            }
            differing.is_empty()
        }
        Err(e) => {
            fails.push(format!("rerun failed: {e}"));
            false
        }
    };
    let ok = fails.is_empty();
    let detail = format!(
        "{manifests}/9 manifests; rerun byte-identical: {identical} ({} files); MPE lag-3 p {lag3:.1e}; strongest {} hit on IMF{}; SHAP top 3 {}; {shown} interaction slopes shown; additivity {residual:.1e}{}",
        first.len(),
        run.truth.mid_driver,
        strongest_imf.map_or("?".into(), |v| v.to_string()),
        top.join(", "),
        if ok { String::new() } else { format!("; FAILED: {}", fails.join("; ")) }
    );
    (ok, detail)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, outcome: Outcome| {
        println!("{} {name}: {}", if outcome.0 { "PASS" } else { "FAIL" }, outcome.1);
        results.push((name, outcome));
    };
    report("vmd two-tone recovery", vmd_two_tone());
    report("granger null calibration and planted lag", granger_calibration());
    report("adf size and power", adf_calibration());
    report("lstm gradient check", lstm_gradient());
    let e2e = run_e2e();
    report("lstm learnability", lstm_learnability(&e2e));
    report("kernelshap exactness", kernel_shap_exactness());
    report("diebold-mariano calibration", diebold_mariano_checks());
    report("arima recovery", arima_recovery());
    report("mpe index examples", mpe_index_examples());
    report("interaction analysis", interaction_checks());
    report("end-to-end synthetic pipeline", end_to_end(&e2e));
    let failed = results.iter().filter(|(_, o)| !o.0).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
