//! Synthetic corpus and macro panel with planted structure: the weekly MPE
//! index drives target returns at lags 3 to 5, a mid-frequency search-volume
//! series drives the target at lag 2, and every message body scores to its
//! planted stance under the lexicon.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use nml_core::messages::{build_mpe_weekly_on, write_jsonl, ClassifiedMessage, Lexicon, RawMessage, Source, Stance};
use nml_core::rng::stream;
use nml_core::series::VARIABLES;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};
use serde::{Deserialize, Serialize};

pub const MIN_WEEKS: usize = 120;

/// Coefficients of the target return on MPE at lags 3, 4 and 5.
pub const MPE_LAGS: [(usize, f64); 3] = [(3, 0.05), (4, 0.04), (5, 0.03)];
/// Lag and coefficient of the target return on the mid-frequency driver.
pub const MID_LAG: usize = 2;
pub const MID_COEF: f64 = 0.004;
pub const MID_PERIOD: f64 = 10.0;
pub const MID_DRIVER: &str = "GgleInfl";
pub const NOISE_SD: f64 = 0.015;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub seed: u64,
    pub weeks: usize,
    /// Poisson mean of the per-week message count; one message is added so
    /// no week is empty.
    pub message_rate: f64,
    pub start: NaiveDate,
}

impl SyntheticOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, weeks: 546, message_rate: 20.0, start: NaiveDate::from_ymd_opt(2013, 1, 4).expect("valid date") }
    }
}

/// Ground truth written next to the generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub options: SyntheticOptions,
    pub target: String,
    pub mpe_lags: Vec<(usize, f64)>,
    pub mid_driver: String,
    pub mid_lag: usize,
    pub mid_coef: f64,
    pub mid_period_weeks: f64,
    /// Target mode the mid-frequency driver feeds, counted from the lowest
    /// centre frequency.
    pub mid_target_imf: usize,
    pub noise_sd: f64,
    pub variables: Vec<String>,
    pub messages: usize,
    pub events: usize,
}

pub struct Synthetic {
    pub messages: Vec<RawMessage>,
    /// Planted stance of each message, same order.
    pub stances: Vec<Stance>,
    /// Weekly index computed from the planted stances.
    pub mpe: Vec<f64>,
    pub grid: Vec<NaiveDate>,
    /// `(file name, header, rows)` for each observation file.
    pub macro_files: Vec<(&'static str, Vec<String>, Vec<(NaiveDate, Vec<String>)>)>,
    pub events: Vec<NaiveDate>,
    pub truth: Truth,
}

const FILLER: &[&str] = &[
    "fed",
    "powell",
    "btc",
    "bitcoin",
    "market",
    "today",
    "this",
    "week",
    "looks",
    "expect",
    "the",
    "meeting",
    "fomc",
    "watch",
    "chart",
    "crypto",
    "dollar",
    "bonds",
    "yields",
    "traders",
    "pricing",
    "now",
    "soon",
    "again",
    "probably",
    "maybe",
    "next",
    "big",
    "move",
    "data",
    "jobs",
    "print",
    "cpi",
    "after",
    "before",
    "minutes",
    "statement",
];

fn filler(rng: &mut ChaCha8Rng, words: std::ops::Range<usize>) -> Vec<&'static str> {
    let n = rng.gen_range(words);
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect()
}

/// Body whose lexicon score is `stance`: the net count of dovish over
/// hawkish phrases, separated by filler words so phrases never merge.
fn body(rng: &mut ChaCha8Rng, lex: &Lexicon, stance: Stance) -> String {
    loop {
        let v = stance.value() as i64;
        let extra = if v.abs() == 2 { rng.gen_range(0..2) } else { 0 };
        let pairs = if v == 0 { rng.gen_range(0..2) } else { 0 };
        let (dove, hawk) = if v >= 0 { (v + extra + pairs, pairs) } else { (pairs, -v + extra + pairs) };
        let mut phrases: Vec<&str> = Vec::new();
        for (k, terms) in [(dove, Lexicon::dovish_terms()), (hawk, Lexicon::hawkish_terms())] {
            phrases.extend((0..k).map(|_| *terms.choose(rng).expect("non-empty")));
        }
        phrases.shuffle(rng);
        let mut words: Vec<&str> = filler(rng, 1..4);
        for p in phrases {
            words.push(p);
            words.extend(filler(rng, 1..3));
        }
        let mut text = words.join(" ");
        if let Some(first) = text.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        if lex.score(&text) == stance {
            return text;
        }
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite sd")
}

fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    let e = normal(sd * (1.0 - phi * phi).sqrt());
    let mut x = normal(sd).sample(rng);
    (0..n)
        .map(|_| {
            x = phi * x + e.sample(rng);
            x
        })
        .collect()
}

/// AR(2) resonating at `period` with unit sample sd.
fn resonant(rng: &mut ChaCha8Rng, n: usize, period: f64, radius: f64) -> Vec<f64> {
    let e = normal(1.0);
    let (a1, a2) = (2.0 * radius * (2.0 * PI / period).cos(), -radius * radius);
    let burn = 200;
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n + burn {
        let x = a1 * x1 + a2 * x2 + e.sample(rng);
        (x2, x1) = (x1, x);
        if i >= burn {
            out.push(x);
        }
    }
    let m = out.iter().sum::<f64>() / n as f64;
    let sd = (out.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    out.iter().map(|v| (v - m) / sd).collect()
}

fn cum_exp(start: f64, returns: &[f64]) -> Vec<f64> {
    let mut p = start;
    returns
        .iter()
        .map(|r| {
            p *= r.exp();
            p
        })
        .collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Generates the corpus, the macro panel and event dates for `opts`.
pub fn gen_synthetic(opts: &SyntheticOptions) -> Result<Synthetic, String> {
    let n = opts.weeks;
    if n < MIN_WEEKS {
        return Err(format!("weeks must be at least {MIN_WEEKS}, got {n}"));
    }
    if !(opts.message_rate.is_finite() && opts.message_rate >= 0.0) {
        return Err(format!("message rate must be a non-negative number, got {}", opts.message_rate));
    }
    let seed = opts.seed;
    let first = nml_core::series::week_ending_friday(opts.start);
    let grid: Vec<NaiveDate> = (0..n).map(|t| first + Duration::weeks(t as i64)).collect();

    // messages
    let lex = Lexicon::default();
    let latent = ar1(&mut stream(seed, "synthetic/latent", &[]), n, 0.85, 0.5);
    let mut rng = stream(seed, "synthetic/messages", &[]);
    let count = Poisson::new(opts.message_rate.max(1e-9)).expect("positive rate");
    let stance_noise = normal(0.8);
    let likes = Geometric::new(0.3).expect("valid p");
    let reshares = Geometric::new(0.6).expect("valid p");
    let mut messages = Vec::new();
    let mut stances = Vec::new();
    for (t, friday) in grid.iter().enumerate() {
        let k = 1 + count.sample(&mut rng) as usize;
        let mut week: Vec<(RawMessage, Stance)> = (0..k)
            .map(|i| {
                let s = (latent[t] + stance_noise.sample(&mut rng)).round().clamp(-2.0, 2.0) as i64;
                let stance = Stance::from_value(s).expect("clamped");
                let day = *friday - Duration::days(rng.gen_range(0..7));
                let secs = rng.gen_range(0..86_400);
                let created_at = day.and_hms_opt(0, 0, 0).expect("midnight") + Duration::seconds(secs);
                let msg = RawMessage {
                    id: format!("s{t:04}-{i:03}"),
                    created_at,
                    body: body(&mut rng, &lex, stance),
                    likes: likes.sample(&mut rng),
                    reshares: reshares.sample(&mut rng),
                };
                (msg, stance)
            })
            .collect();
        week.sort_by(|a, b| (a.0.created_at, &a.0.id).cmp(&(b.0.created_at, &b.0.id)));
        for (m, s) in week {
            messages.push(m);
            stances.push(s);
        }
    }
    let classified: Vec<ClassifiedMessage> =
        messages.iter().zip(&stances).map(|(m, s)| ClassifiedMessage { message: m.clone(), stance: *s, source: Source::Lexicon }).collect();
    let mpe = build_mpe_weekly_on(&classified, grid[0], grid[n - 1]).map_err(|e| e.to_string())?.series.values().to_vec();

    // target and its drivers
    let mid = resonant(&mut stream(seed, "synthetic/mid", &[]), n, MID_PERIOD, 0.9);
    let ggle_infl: Vec<f64> =
        mid.iter().zip(ar1(&mut stream(seed, "synthetic/mid-noise", &[]), n, 0.0, 0.5)).map(|(m, e)| 50.0 + 5.0 * m + e).collect();
    let noise = normal(NOISE_SD);
    let mut rng = stream(seed, "synthetic/target", &[]);
    let returns: Vec<f64> = (0..n)
        .map(|t| {
            let mut r = noise.sample(&mut rng);
            for (lag, c) in MPE_LAGS {
                if t >= lag {
                    r += c * mpe[t - lag];
                }
            }
            if t >= MID_LAG {
                r += MID_COEF * (ggle_infl[t - MID_LAG] - 50.0);
            }
            r
        })
        .collect();
    let btc = cum_exp(400.0, &returns);

    // policy rate and announcement dates, eight meetings a year
    let mut rng = stream(seed, "synthetic/policy", &[]);
    let mut events = Vec::new();
    let mut target_rate: f64 = 1.0;
    let mut jitter: i64 = 0;
    let mut next_meeting = 3.0;
    let mut ffr = Vec::with_capacity(n);
    for (t, friday) in grid.iter().enumerate() {
        if t as f64 >= next_meeting {
            next_meeting += 6.5;
            events.push(*friday - Duration::days(2));
            let u: f64 = rng.gen();
            if u < 0.3 {
                target_rate += 0.25;
            } else if u < 0.5 && target_rate > 0.25 {
                target_rate -= 0.25;
            }
        }
        let step: f64 = rng.gen();
        if step < 0.25 && jitter > -2 {
            jitter -= 1;
        } else if step > 0.75 && jitter < 2 {
            jitter += 1;
        }
        ffr.push(((target_rate * 100.0).round() + jitter as f64) / 100.0);
    }

    // remaining macro variables
    let mut rng = stream(seed, "synthetic/macro", &[]);
    let mut level = |base: f64, phi: f64, sd: f64| -> Vec<f64> { ar1(&mut rng, n, phi, sd).into_iter().map(|x| base + x).collect() };
    let news_sent = level(0.0, 0.7, 0.2);
    let infl_exp = level(2.0, 0.9, 0.3);
    let ggle_reces = level(30.0, 0.8, 5.0);
    let ggle_climate = level(40.0, 0.6, 5.0);
    let infect = level(10.0, 0.9, 3.0);
    let mut log_level =
        |base: f64, phi: f64, sd: f64| -> Vec<f64> { ar1(&mut rng, n, phi, sd).into_iter().map(|x| base * x.exp()).collect() };
    let pol_uncert = log_level(120.0, 0.8, 0.3);
    let high_yield = log_level(5.0, 0.95, 0.1);
    let geopol = log_level(100.0, 0.7, 0.3);
    let vix = log_level(20.0, 0.8, 0.3);
    let jobless = log_level(220_000.0, 0.9, 0.05);
    let exch = log_level(1.1, 0.95, 0.05);
    let mut rng = stream(seed, "synthetic/prices", &[]);
    let mut price = |start: f64, sd: f64| -> Vec<f64> {
        let r: Vec<f64> = (0..n).map(|_| normal(sd).sample(&mut rng)).collect();
        cum_exp(start, &r)
    };
    let sp500 = price(1500.0, 0.02);
    let brent = price(80.0, 0.04);
    let gold = price(1300.0, 0.015);
    let usd = price(90.0, 0.01);

    let weekly_cols: Vec<(&str, &Vec<f64>)> = vec![
        ("Btc", &btc),
        ("NewsSent", &news_sent),
        ("PolUncert", &pol_uncert),
        ("SP500", &sp500),
        ("Brent", &brent),
        ("Gold", &gold),
        ("HighYield", &high_yield),
        ("VIX", &vix),
        ("USDollar", &usd),
        ("FFR", &ffr),
        ("5yInflExp", &infl_exp),
        (MID_DRIVER, &ggle_infl),
        ("GgleReces", &ggle_reces),
        ("GgleClimate", &ggle_climate),
    ];
    let header = |cols: &[(&str, &Vec<f64>)]| std::iter::once("date".to_string()).chain(cols.iter().map(|c| c.0.to_string())).collect();
    let markets = (
        "markets.csv",
        header(&weekly_cols),
        grid.iter().enumerate().map(|(t, d)| (*d, weekly_cols.iter().map(|c| fmt(c.1[t])).collect())).collect(),
    );

    // business-daily observations averaged to weeks downstream
    let daily_cols: Vec<(&str, &Vec<f64>)> = vec![("GeopolRisk", &geopol), ("Infect", &infect), ("ExchRate", &exch)];
    let mut rng = stream(seed, "synthetic/daily", &[]);
    let mut daily_rows = Vec::with_capacity(5 * n);
    for (t, friday) in grid.iter().enumerate() {
        for back in (0..5).rev() {
            let d = *friday - Duration::days(back);
            let row = daily_cols.iter().map(|c| fmt(c.1[t] * (1.0 + normal(0.01).sample(&mut rng)))).collect();
            daily_rows.push((d, row));
        }
    }
    let daily = ("daily.csv", header(&daily_cols), daily_rows);
    let claims_cols: Vec<(&str, &Vec<f64>)> = vec![("JoblessClaim", &jobless)];
    let claims = (
        "claims.csv",
        header(&claims_cols),
        grid.iter().enumerate().map(|(t, d)| (*d - Duration::days(1), vec![fmt(jobless[t].round())])).collect(),
    );

    let truth = Truth {
        options: opts.clone(),
        target: "Btc".into(),
        mpe_lags: MPE_LAGS.to_vec(),
        mid_driver: MID_DRIVER.into(),
        mid_lag: MID_LAG,
        mid_coef: MID_COEF,
        mid_period_weeks: MID_PERIOD,
        mid_target_imf: 2,
        noise_sd: NOISE_SD,
        variables: VARIABLES.iter().map(|v| v.name.to_string()).collect(),
        messages: messages.len(),
        events: events.len(),
    };
    Ok(Synthetic { messages, stances, mpe, grid, macro_files: vec![markets, daily, claims], events, truth })
}

/// Pipeline configuration for a generated directory. SHAP sampling is
/// capped so a full run stays within minutes on one core.
pub fn default_config(seed: u64, macro_files: &[&str]) -> String {
    let files: Vec<String> = macro_files.iter().map(|f| format!("{f:?}")).collect();
    format!(
        "seed = {seed}\noutput_dir = \"out\"\n\n[data]\nmessages = \"messages.jsonl\"\nmacro = [{}]\nevents = \"fomc.csv\"\n\n[explain]\nnsamples = 600\nmax_instances = 13\n",
        files.join(", ")
    )
}

fn csv_file(path: &Path, header: &[String], rows: &[(NaiveDate, Vec<String>)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (d, cells) in rows {
        w.write_record(std::iter::once(d.to_string()).chain(cells.iter().cloned()))?;
    }
    w.flush()
}

impl Synthetic {
    /// Writes messages, planted labels, observation files, event dates,
    /// ground truth and a ready-to-run config into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join("messages.jsonl");
        write_jsonl(std::io::BufWriter::new(std::fs::File::create(&path)?), &self.messages)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        written.push(path);

        let path = dir.join("labels.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["id", "stance"])?;
        for (m, s) in self.messages.iter().zip(&self.stances) {
            w.write_record([m.id.clone(), s.value().to_string()])?;
        }
        w.flush()?;
        written.push(path);

        for (name, header, rows) in &self.macro_files {
            let path = dir.join(name);
            csv_file(&path, header, rows)?;
            written.push(path);
        }

        let path = dir.join("fomc.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["date"])?;
        for d in &self.events {
            w.write_record([d.to_string()])?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join("truth.json");
        let mut f = std::fs::File::create(&path)?;
        serde_json::to_writer_pretty(&mut f, &self.truth)?;
        f.write_all(b"\n")?;
        written.push(path);

        let path = dir.join("nml.toml");
        let names: Vec<&str> = self.macro_files.iter().map(|f| f.0).collect();
        std::fs::write(&path, default_config(self.truth.options.seed, &names))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> Synthetic {
        let mut o = SyntheticOptions::new(seed);
        o.weeks = MIN_WEEKS;
        o.message_rate = 3.0;
        gen_synthetic(&o).unwrap()
    }

    #[test]
    fn bodies_score_to_planted_stance() {
        let lex = Lexicon::default();
        let s = small(3);
        assert!(s.messages.iter().zip(&s.stances).all(|(m, st)| lex.score(&m.body) == *st));
        for v in -2..=2 {
            assert!(s.stances.iter().any(|st| st.value() == v), "stance {v} never planted");
        }
    }

    #[test]
    fn too_few_weeks_rejected() {
        let mut o = SyntheticOptions::new(1);
        o.weeks = MIN_WEEKS - 1;
        assert!(gen_synthetic(&o).is_err());
    }

    #[test]
    fn eighteen_observed_columns_plus_index() {
        let s = small(5);
        let mut names: Vec<String> = s.macro_files.iter().flat_map(|f| f.1.iter().skip(1).cloned()).collect();
        names.push("MPE".into());
        names.sort();
        let mut expected = s.truth.variables.clone();
        expected.sort();
        assert_eq!(names, expected);
    }

    #[test]
    fn rate_has_flat_weeks_and_both_directions() {
        let s = small(7);
        let col = s.macro_files[0].1.iter().position(|h| h == "FFR").unwrap() - 1;
        let ffr: Vec<f64> = s.macro_files[0].2.iter().map(|r| r.1[col].parse().unwrap()).collect();
        let d: Vec<f64> = ffr.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(d.contains(&0.0) && d.iter().any(|x| *x > 0.0) && d.iter().any(|x| *x < 0.0));
    }

    #[test]
    fn index_matches_weighted_stances() {
        let s = small(9);
        let t = 17;
        let (mut num, mut den) = (0.0, 0.0);
        for (m, st) in s.messages.iter().zip(&s.stances) {
            if nml_core::series::week_ending_friday(m.date()) == s.grid[t] {
                num += m.weight() * st.value() as f64;
                den += m.weight();
            }
        }
        assert!((s.mpe[t] - num / den).abs() < 1e-12);
    }
}
