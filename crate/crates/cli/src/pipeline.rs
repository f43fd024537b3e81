//! Sequential stage runner with dependency checks, content-hash skipping
//! and manifest writing.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::manifest::{hash_records, list_files, record, sha256_bytes, FileRecord, Manifest, MANIFEST_FILE, MANIFEST_VERSION};
use crate::stage::Stage;
use crate::stages;

/// Read and write access to the artifact tree for one stage.
pub struct StageContext<'a> {
    pub cfg: &'a PipelineConfig,
    pub out: &'a Path,
    pub stage: Stage,
}

impl StageContext<'_> {
    pub fn input(&self, stage: Stage, name: &str) -> PathBuf {
        self.out.join(stage.name()).join(name)
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out.join(self.stage.name()).join(name)
    }

    /// Buffered writer for an output file, creating parent directories.
    pub fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.output(name);
        if let Some(p) = path.parent() {
            std::fs::create_dir_all(p).map_err(|e| self.fail(e))?;
        }
        File::create(&path).map(BufWriter::new).map_err(|e| self.fail(format!("{}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| self.fail(e))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        use std::io::Write;
        let mut w = self.create(name)?;
        w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| self.fail(e))
    }

    pub fn read_json<T: serde::de::DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T> {
        let path = self.input(stage, name);
        let text = std::fs::read_to_string(&path).map_err(|e| self.fail(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| self.fail(format!("{}: {e}", path.display())))
    }

    pub fn fail(&self, e: impl std::fmt::Display) -> PipelineError {
        PipelineError::stage(self.stage, e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: Stage,
    /// Inputs and config unchanged, outputs intact; nothing was rerun.
    pub skipped: bool,
    pub outputs: usize,
    pub seconds: f64,
}

/// Stage-relevant configuration, hashed into the manifest.
fn stage_config(cfg: &PipelineConfig, stage: Stage) -> serde_json::Value {
    let v = &cfg.variables;
    let section = match stage {
        Stage::Ingest => json!({ "macro_files": cfg.data.macro_files.len() }),
        Stage::Classify => json!({ "classifier": cfg.classifier, "url": cfg.classifier.endpoint() }),
        Stage::Index => json!({ "rate": v.rate, "event_half_window": v.event_half_window }),
        Stage::Stats => json!({ "stats": cfg.stats, "target": v.target, "rate": v.rate }),
        Stage::Granger => json!({ "granger": cfg.granger, "target": v.target }),
        Stage::Vmd => json!({ "vmd": cfg.vmd, "target": v.target }),
        Stage::Forecast => json!({ "forecast": cfg.forecast_config(), "target": v.target }),
        Stage::Explain => json!({ "explain": cfg.explain_config(), "variables": v }),
        Stage::Report => json!({ "variables": v }),
    };
    json!({ "stage": stage.name(), "seed": cfg.seed, "tool_version": env!("CARGO_PKG_VERSION"), "config": section })
}

fn external_inputs(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<FileRecord>> {
    if stage != Stage::Ingest {
        return Ok(Vec::new());
    }
    let mut files = vec![("messages", &cfg.data.messages), ("events", &cfg.data.events)];
    files.extend(cfg.data.macro_files.iter().map(|p| ("macro", p)));
    files
        .into_iter()
        .enumerate()
        .map(|(i, (role, p))| {
            let name = p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            record(p, format!("input:{role}:{i}:{name}")).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn run_stage(ctx: &StageContext) -> Result<()> {
    match ctx.stage {
        Stage::Ingest => stages::ingest(ctx),
        Stage::Classify => stages::classify(ctx),
        Stage::Index => stages::index(ctx),
        Stage::Stats => stages::stats(ctx),
        Stage::Granger => stages::granger(ctx),
        Stage::Vmd => stages::vmd(ctx),
        Stage::Forecast => stages::forecast(ctx),
        Stage::Explain => stages::explain(ctx),
        Stage::Report => crate::report::report(ctx),
    }
}

/// Stages outside `requested` whose artifacts `requested` needs but which
/// have no intact manifest on disk, per requesting stage.
pub fn missing_dependencies(out: &Path, requested: &[Stage]) -> Option<(Stage, Vec<Stage>)> {
    for &s in requested {
        let missing: Vec<Stage> = s
            .depends_on()
            .iter()
            .copied()
            .filter(|d| !requested.contains(d))
            .filter(|d| Manifest::load(out, *d).is_none_or(|m| !m.outputs_intact(out)))
            .collect();
        if !missing.is_empty() {
            return Some((s, missing));
        }
    }
    None
}

/// Runs `stages` in dependency order. A stage whose config hash, input hash
/// and outputs match its manifest is skipped unless `force` is set.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage], force: bool) -> Result<Vec<StageOutcome>> {
    let mut requested = stages.to_vec();
    requested.sort();
    requested.dedup();
    let out = cfg.output_dir.as_path();
    if let Some((stage, missing)) = missing_dependencies(out, &requested) {
        return Err(PipelineError::Dependency { stage, missing });
    }
    std::fs::create_dir_all(out).map_err(|e| PipelineError::Config(format!("{}: {e}", out.display())))?;
    let mut outcomes = Vec::with_capacity(requested.len());
    for stage in requested {
        let started = Instant::now();
        let mut inputs = external_inputs(cfg, stage)?;
        for d in stage.depends_on() {
            let m = Manifest::load(out, *d).ok_or(PipelineError::Dependency { stage, missing: vec![*d] })?;
            inputs.extend(m.outputs);
        }
        let config_json = serde_json::to_vec(&stage_config(cfg, stage)).expect("config serialises");
        let config_hash = sha256_bytes(&config_json);
        let input_hash = hash_records(&inputs);
        if !force {
            if let Some(m) = Manifest::load(out, stage) {
                if m.config_hash == config_hash && m.input_hash == input_hash && m.outputs_intact(out) {
                    log::info!("{stage}: up to date");
                    outcomes.push(StageOutcome { stage, skipped: true, outputs: m.outputs.len(), seconds: 0.0 });
                    continue;
                }
            }
        }
        let dir = out.join(stage.name());
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| PipelineError::stage(stage, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| PipelineError::stage(stage, e))?;
        log::info!("{stage}: running");
        run_stage(&StageContext { cfg, out, stage })?;
        let outputs: Vec<FileRecord> = list_files(&dir, out)
            .map_err(|e| PipelineError::stage(stage, e))?
            .into_iter()
            .filter(|(p, _)| p.file_name().is_none_or(|n| n != MANIFEST_FILE))
            .map(|(p, label)| record(&p, label))
            .collect::<std::io::Result<_>>()
            .map_err(|e| PipelineError::stage(stage, e))?;
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            stage,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_hash,
            input_hash,
            depends_on: stage.depends_on().to_vec(),
            inputs,
            outputs,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        manifest.write(out).map_err(|e| PipelineError::stage(stage, e))?;
        let seconds = started.elapsed().as_secs_f64();
        log::info!("{stage}: wrote {} files in {seconds:.1}s", manifest.outputs.len());
        outcomes.push(StageOutcome { stage, skipped: false, outputs: manifest.outputs.len(), seconds });
    }
    Ok(outcomes)
}
