//! Command-line behaviour on small synthetic datasets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use nml::synthetic::{gen_synthetic, SyntheticOptions};
use nml::{run_pipeline, PipelineConfig, Stage};

const WEEKS: usize = 160;

fn nml() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nml"));
    c.env("NML_LOG_LEVEL", "warn").env_remove("NML_CLASSIFIER_URL");
    c
}

fn dataset(dir: &Path, seed: u64) -> PathBuf {
    let opts = SyntheticOptions { weeks: WEEKS, ..SyntheticOptions::new(seed) };
    gen_synthetic(&opts).unwrap().write(dir).unwrap();
    dir.join("nml.toml")
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn report_alone_names_missing_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path(), 1);
    let out = nml().args(["report", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let err: serde_json::Value = serde_json::from_str(stderr.lines().rfind(|l| l.starts_with('{')).unwrap()).unwrap();
    assert_eq!(err["error"], "dependency");
    let missing: Vec<&str> = err["missing"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for stage in ["stats", "index", "forecast", "explain"] {
        assert!(missing.contains(&stage), "{missing:?}");
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path(), 2);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("[explain]", "[explain]\nbogus = 1");
    std::fs::write(&cfg, text).unwrap();
    let out = nml().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn stage_seed_cannot_be_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path(), 2);
    let text = std::fs::read_to_string(&cfg).unwrap().replace("[explain]", "[explain]\nseed = 3");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(nml().args(["ingest", "--config"]).arg(&cfg).output().unwrap().status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(nml().args(["ingest"]).output().unwrap().status.code(), Some(2));
    assert_eq!(nml().args(["--help"]).output().unwrap().status.code(), Some(0));
}

#[test]
fn generator_is_seed_deterministic() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, seed) in [(&a, 5), (&b, 5), (&c, 6)] {
        let status =
            nml().args(["gen-synthetic", "--weeks", "130", "--seed", &seed.to_string(), "--out"]).arg(dir.path()).output().unwrap().status;
        assert!(status.success());
    }
    let fa = files(a.path());
    assert_eq!(fa, files(b.path()));
    assert_ne!(fa.get(Path::new("messages.jsonl")), files(c.path()).get(Path::new("messages.jsonl")));
}

#[test]
fn lexicon_recovers_planted_stances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::load(&dataset(dir.path(), 3)).unwrap();
    run_pipeline(&cfg, &[Stage::Ingest, Stage::Classify], false).unwrap();
    let mut labels = BTreeMap::new();
    for row in csv::Reader::from_path(dir.path().join("labels.csv")).unwrap().records() {
        let row = row.unwrap();
        labels.insert(row[0].to_string(), row[1].parse::<i64>().unwrap());
    }
    let text = std::fs::read_to_string(cfg.output_dir.join("classify/classified.jsonl")).unwrap();
    let mut seen = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(Some(&v["stance"].as_i64().unwrap()), labels.get(v["id"].as_str().unwrap()), "{line}");
        seen += 1;
    }
    assert_eq!(seen, labels.len());
}

#[test]
fn unchanged_rerun_skips_and_force_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::load(&dataset(dir.path(), 4)).unwrap();
    let stages = [Stage::Ingest, Stage::Classify, Stage::Index, Stage::Stats, Stage::Granger];
    let first = run_pipeline(&cfg, &stages, false).unwrap();
    assert!(first.iter().all(|o| !o.skipped));
    let before = files(&cfg.output_dir);
    let second = run_pipeline(&cfg, &stages, false).unwrap();
    assert!(second.iter().all(|o| o.skipped));
    assert_eq!(before, files(&cfg.output_dir));

    let mut changed = cfg.clone();
    changed.granger.max_lag = 4;
    let third = run_pipeline(&changed, &stages, false).unwrap();
    let rerun: Vec<Stage> = third.iter().filter(|o| !o.skipped).map(|o| o.stage).collect();
    assert_eq!(rerun, vec![Stage::Granger]);

    let forced = run_pipeline(&changed, &stages, true).unwrap();
    assert!(forced.iter().all(|o| !o.skipped));
}
