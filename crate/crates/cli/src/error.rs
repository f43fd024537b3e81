//! Pipeline errors and their exit codes.

use serde_json::json;
use thiserror::Error;

use crate::stage::Stage;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} needs outputs of {}; run them first", names(missing))]
    Dependency { stage: Stage, missing: Vec<Stage> },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

fn names(stages: &[Stage]) -> String {
    stages.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
}

impl PipelineError {
    pub fn stage(stage: Stage, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage { stage, message: e.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Dependency { .. } => 3,
            PipelineError::Stage { .. } => 4,
        }
    }

    /// Machine-readable form written to stderr by the binary.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            PipelineError::Config(m) => json!({ "error": "config", "exit_code": 2, "message": m }),
            PipelineError::Dependency { stage, missing } => json!({
                "error": "dependency",
                "exit_code": 3,
                "stage": stage.name(),
                "missing": missing.iter().map(|s| s.name()).collect::<Vec<_>>(),
                "message": self.to_string(),
            }),
            PipelineError::Stage { stage, message } => json!({
                "error": "stage",
                "exit_code": 4,
                "stage": stage.name(),
                "message": message,
            }),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
