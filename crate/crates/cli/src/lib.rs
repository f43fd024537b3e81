//! Pipeline runner for the nml analysis: stage orchestration with
//! manifests, a synthetic data generator and the report renderer.

#![allow(clippy::type_complexity)]

pub mod app;
pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod stage;
pub mod stages;
pub mod svg;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::{PipelineError, Result};
pub use pipeline::{run_pipeline, StageOutcome};
pub use stage::Stage;
