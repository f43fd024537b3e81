//! Pipeline configuration: one TOML file, unknown keys rejected.

use std::path::{Path, PathBuf};
use std::time::Duration;

use nml_core::explain::ExplainConfig;
use nml_core::forecasting::EnsembleConfig;
use nml_core::messages::{BatchOptions, RemoteConfig, CLASSIFIER_URL_ENV};
use nml_core::rng::derive_seed;
use nml_core::vmd::VmdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// Message corpus, JSON Lines.
    pub messages: PathBuf,
    /// Dated observations, `date,<name>...`; several files are merged.
    #[serde(rename = "macro")]
    pub macro_files: Vec<PathBuf>,
    /// Event dates, header `date`.
    pub events: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Lexicon,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub backend: Backend,
    /// Endpoint for the remote backend; `NML_CLASSIFIER_URL` overrides it.
    pub url: Option<String>,
    pub timeout_secs: f64,
    pub retries: usize,
    pub backoff_ms: u64,
    pub label_retries: usize,
    pub concurrency: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { backend: Backend::Lexicon, url: None, timeout_secs: 30.0, retries: 3, backoff_ms: 200, label_retries: 2, concurrency: 4 }
    }
}

impl ClassifierConfig {
    pub fn endpoint(&self) -> Option<String> {
        std::env::var(CLASSIFIER_URL_ENV).ok().filter(|u| !u.is_empty()).or_else(|| self.url.clone())
    }

    pub fn remote(&self, url: String) -> RemoteConfig {
        RemoteConfig {
            url,
            timeout: Duration::from_secs_f64(self.timeout_secs),
            retries: self.retries,
            backoff: Duration::from_millis(self.backoff_ms),
        }
    }

    pub fn batch(&self) -> BatchOptions {
        BatchOptions { label_retries: self.label_retries, concurrency: self.concurrency }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariableConfig {
    pub target: String,
    /// Rate series whose weekly change defines the rate regimes.
    pub rate: String,
    /// Feature studied in the interaction analysis.
    pub interaction: String,
    /// Weeks either side of an event.
    pub event_half_window: usize,
}

impl Default for VariableConfig {
    fn default() -> Self {
        Self { target: "Btc".into(), rate: "FFR".into(), interaction: "MPE".into(), event_half_window: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub adf_alpha: f64,
    /// Differences applied at most while the unit root is not rejected.
    pub max_differences: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { adf_alpha: 0.05, max_differences: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrangerConfig {
    pub max_lag: usize,
}

impl Default for GrangerConfig {
    fn default() -> Self {
        Self { max_lag: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VmdStageConfig {
    pub max_lag: usize,
    pub alpha_level: f64,
    pub decomposition: VmdConfig,
}

impl Default for VmdStageConfig {
    fn default() -> Self {
        Self { max_lag: 6, alpha_level: 0.05, decomposition: VmdConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every random substream.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub variables: VariableConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub granger: GrangerConfig,
    #[serde(default)]
    pub vmd: VmdStageConfig,
    #[serde(default)]
    pub forecast: EnsembleConfig,
    #[serde(default)]
    pub explain: ExplainConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    /// Parses, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| PipelineError::Config(e.to_string()))?;
        for section in ["forecast", "explain"] {
            if raw.get(section).and_then(|s| s.get("seed")).is_some() {
                return Err(PipelineError::Config(format!("[{section}] seed is derived from the top-level seed and cannot be set")));
            }
        }
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        resolve(&mut cfg.data.messages);
        resolve(&mut cfg.data.events);
        cfg.data.macro_files.iter_mut().for_each(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.data.macro_files.is_empty() {
            return bad("[data] macro lists no files".into());
        }
        for p in [&self.data.messages, &self.data.events].into_iter().chain(&self.data.macro_files) {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        if self.classifier.backend == Backend::Remote && self.classifier.endpoint().is_none() {
            return bad(format!("remote classifier needs [classifier] url or {CLASSIFIER_URL_ENV}"));
        }
        if !(self.classifier.timeout_secs > 0.0 && self.classifier.timeout_secs.is_finite()) {
            return bad("[classifier] timeout_secs must be positive".into());
        }
        if !(self.stats.adf_alpha > 0.0 && self.stats.adf_alpha < 1.0) {
            return bad("[stats] adf_alpha must lie in (0, 1)".into());
        }
        if !(self.vmd.alpha_level > 0.0 && self.vmd.alpha_level < 1.0) {
            return bad("[vmd] alpha_level must lie in (0, 1)".into());
        }
        if self.granger.max_lag == 0 || self.vmd.max_lag == 0 {
            return bad("lag limits must be at least 1".into());
        }
        let f = &self.forecast;
        if f.runs == 0 || f.trials == 0 || f.max_epochs == 0 {
            return bad("[forecast] runs, trials and max_epochs must be at least 1".into());
        }
        let s = &f.space;
        if s.units.is_empty() || s.lookback.is_empty() || s.optimizers.is_empty() || s.batch_sizes.is_empty() {
            return bad("[forecast.space] categorical domains must be nonempty".into());
        }
        if s.units.contains(&0) || s.lookback.contains(&0) || s.batch_sizes.contains(&0) {
            return bad("[forecast.space] units, lookback and batch sizes must be positive".into());
        }
        if !(s.dropout.0 >= 0.0 && s.dropout.0 <= s.dropout.1 && s.dropout.1 < 1.0) {
            return bad("[forecast.space] dropout range must lie in [0, 1)".into());
        }
        if !(s.learning_rate.0 > 0.0 && s.learning_rate.0 <= s.learning_rate.1) {
            return bad("[forecast.space] learning_rate range must be positive and ordered".into());
        }
        if self.explain.background == 0 {
            return bad("[explain] background must be at least 1".into());
        }
        Ok(())
    }

    pub fn forecast_config(&self) -> EnsembleConfig {
        EnsembleConfig { seed: derive_seed(self.seed, "forecast", &[]), ..self.forecast.clone() }
    }

    pub fn explain_config(&self) -> ExplainConfig {
        ExplainConfig { seed: derive_seed(self.seed, "explain", &[]), ..self.explain.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for f in ["m.jsonl", "macro.csv", "fomc.csv"] {
            std::fs::write(dir.path().join(f), "").unwrap();
        }
        dir
    }

    const BASE: &str = "seed = 7\n[data]\nmessages = \"m.jsonl\"\nmacro = [\"macro.csv\"]\nevents = \"fomc.csv\"\n";

    #[test]
    fn minimal_config_uses_defaults_and_resolves_paths() {
        let dir = fixture();
        let cfg = PipelineConfig::parse(BASE, dir.path()).unwrap();
        assert_eq!(cfg.data.messages, dir.path().join("m.jsonl"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.granger.max_lag, 6);
        assert_eq!(cfg.forecast.trials, 75);
        assert_ne!(cfg.forecast_config().seed, cfg.explain_config().seed);
    }

    #[test]
    fn unknown_keys_and_stage_seeds_rejected() {
        let dir = fixture();
        for extra in ["bogus = 1\n", "[forecast]\nseed = 3\n", "[explain]\nseed = 3\n", "[vmd]\nk = 3\n"] {
            let text = format!("{BASE}{extra}");
            assert!(matches!(PipelineConfig::parse(&text, dir.path()), Err(PipelineError::Config(_))), "{extra}");
        }
    }

    #[test]
    fn missing_seed_or_file_rejected() {
        let dir = fixture();
        let no_seed = BASE.replace("seed = 7\n", "");
        assert!(PipelineConfig::parse(&no_seed, dir.path()).is_err());
        let missing = BASE.replace("fomc.csv", "absent.csv");
        let err = PipelineConfig::parse(&missing, dir.path()).unwrap_err();
        assert!(err.to_string().contains("absent.csv"));
        assert_eq!(err.exit_code(), 2);
    }
}
