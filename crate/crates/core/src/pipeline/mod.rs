//! End-to-end clone search for one vulnerable artifact.
//!
//! Stages run in a fixed order and every candidate leaves the pipeline at the
//! first stage it fails. Counts after each stage form the [`StageStats`] row
//! of a report.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clone::CloneConfig;
use crate::fingerprint::DEFAULT_QUERY_CLASSES;
use crate::pov::{PovError, DEFAULT_BUILD_TIMEOUT};
use crate::registry::{Gav, RegistryError, DEFAULT_MAX_PAGES, DEFAULT_PAGE_SIZE};

mod report;
mod run;
mod stats;

pub use report::{
    emit_report, mask_report, render_json, render_table, ConfigEcho, ConfirmedClone, PipelineReport, Removal,
    ReportFormat, REPORT_SCHEMA_VERSION,
};
pub use run::{run_pipeline, Pipeline, STUB_SCRIPT_FILE};
pub use stats::{aggregate_by_ga, consolidate, GaCount, Stage, StageStats};

pub const DEFAULT_CONSOLIDATION_THRESHOLD: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Live,
    Fixture,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerKind {
    /// The stub runner for fixture backends, Maven otherwise.
    #[default]
    Auto,
    Maven,
    Stub,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub original: Gav,
    pub cve_id: String,
    pub pov_dir: Option<PathBuf>,
    pub query_class_count: usize,
    /// Query classes to use instead of the selected ones.
    pub query_classes: Vec<String>,
    pub page_size: usize,
    pub max_pages: usize,
    pub consolidation_threshold: usize,
    pub min_cloned_classes: usize,
    pub worker_count: usize,
    pub build_worker_count: usize,
    pub backend: BackendKind,
    pub fixture_root: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub runner: RunnerKind,
    pub stub_script: Option<PathBuf>,
    pub build_timeout_secs: u64,
    /// Parent of the per-candidate POV workspaces; a temporary directory if unset.
    pub work_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(original: Gav, cve_id: impl Into<String>) -> Self {
        let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
        Self {
            original,
            cve_id: cve_id.into(),
            pov_dir: None,
            query_class_count: DEFAULT_QUERY_CLASSES,
            query_classes: Vec::new(),
            page_size: DEFAULT_PAGE_SIZE,
            max_pages: DEFAULT_MAX_PAGES,
            consolidation_threshold: DEFAULT_CONSOLIDATION_THRESHOLD,
            min_cloned_classes: CloneConfig::default().min_cloned_classes,
            worker_count: workers,
            build_worker_count: workers.div_ceil(2).min(4),
            backend: BackendKind::Live,
            fixture_root: None,
            cache_dir: None,
            runner: RunnerKind::Auto,
            stub_script: None,
            build_timeout_secs: DEFAULT_BUILD_TIMEOUT.as_secs(),
            work_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let positive = [
            ("query_class_count", self.query_class_count),
            ("page_size", self.page_size),
            ("max_pages", self.max_pages),
            ("consolidation_threshold", self.consolidation_threshold),
            ("min_cloned_classes", self.min_cloned_classes),
            ("worker_count", self.worker_count),
            ("build_worker_count", self.build_worker_count),
            ("build_timeout_secs", self.build_timeout_secs as usize),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(PipelineError::Config(format!("{name} must be positive")));
        }
        if self.backend == BackendKind::Fixture && self.fixture_root.is_none() {
            return Err(PipelineError::Config("the fixture backend needs a fixture root".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("original artifact {gav} not found: {message}")]
    OriginalNotFound { gav: Gav, message: String },
    #[error("original artifact {gav} unusable: {message}")]
    OriginalUnusable { gav: Gav, message: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Pov(#[from] PovError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
