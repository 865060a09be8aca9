//! Pipeline reports: JSON for machines, a stage table for people.
//!
//! The JSON document carries `schema_version`; fields are only ever added
//! within a version. No timestamps or paths are included, so identical runs
//! produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stats::{aggregate_by_ga, GaCount, Stage, StageStats};
use super::PipelineConfig;
use crate::clone::ArtifactCloneReport;
use crate::fingerprint::QualifiedClassName;
use crate::pov::VerificationResult;
use crate::registry::Gav;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

const MASKED_GROUP: &str = "masked";

/// The settings that determine a report's content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub original: Gav,
    pub cve_id: String,
    pub pov: bool,
    pub query_class_count: usize,
    pub page_size: usize,
    pub max_pages: usize,
    pub consolidation_threshold: usize,
    pub min_cloned_classes: usize,
}

impl From<&PipelineConfig> for ConfigEcho {
    fn from(config: &PipelineConfig) -> Self {
        Self {
            original: config.original.clone(),
            cve_id: config.cve_id.clone(),
            pov: config.pov_dir.is_some(),
            query_class_count: config.query_class_count,
            page_size: config.page_size,
            max_pages: config.max_pages,
            consolidation_threshold: config.consolidation_threshold,
            min_cloned_classes: config.min_cloned_classes,
        }
    }
}

/// Why a candidate left the pipeline. `stage` is the first stage it failed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Removal {
    pub stage: Stage,
    pub gav: Gav,
    pub cause: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Removal {
    pub fn new(gav: Gav, stage: Stage, cause: &str, detail: Option<String>) -> Self {
        Self {
            stage,
            gav,
            cause: cause.to_string(),
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfirmedClone {
    pub gav: Gav,
    pub clone: ArtifactCloneReport,
    pub verification: VerificationResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub original_classes: usize,
    pub query_classes: Vec<String>,
    pub stage_stats: StageStats,
    /// Same counts with versions ignored.
    pub stage_stats_by_ga: StageStats,
    /// Every candidate that passed clone detection.
    pub clones: Vec<ArtifactCloneReport>,
    pub confirmed: Vec<ConfirmedClone>,
    pub confirmed_ga: Vec<GaCount>,
    pub removals: Vec<Removal>,
    pub masked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    TextTable,
}

pub fn render_json(report: &PipelineReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("reports serialize");
    out.push('\n');
    out
}

/// Stage counts in column order, one row for artifacts and one with
/// versions ignored. Stages that did not run show `-`.
pub fn render_table(report: &PipelineReport) -> String {
    let label_width = "versions ignored".len();
    let widths: Vec<usize> = Stage::ALL.iter().map(|s| s.header().len()).collect();
    let cell = |v: Option<usize>| v.map_or_else(|| "-".to_string(), |n| n.to_string());

    let mut out = String::new();
    let _ = writeln!(out, "{} {}", report.config.cve_id, report.config.original);
    let _ = write!(out, "{:label_width$}", "");
    for (stage, width) in Stage::ALL.iter().zip(&widths) {
        let _ = write!(out, "  {:>width$}", stage.header());
    }
    out.push('\n');
    for (label, stats) in [("artifacts", &report.stage_stats), ("versions ignored", &report.stage_stats_by_ga)] {
        let _ = write!(out, "{label:label_width$}");
        for (value, width) in stats.values().into_iter().zip(&widths) {
            let _ = write!(out, "  {:>width$}", cell(value));
        }
        out.push('\n');
    }
    out
}

fn digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0]);
    }
    hex::encode(hasher.finalize())
}

fn mask_gav(gav: &Gav) -> Gav {
    let artifact = &digest(&[gav.group(), gav.artifact()])[..16];
    let version = &digest(&[gav.group(), gav.artifact(), gav.version()])[..12];
    Gav::new(MASKED_GROUP, artifact, version).expect("hex digests are valid coordinates")
}

fn mask_package(package: &str) -> String {
    format!("{MASKED_GROUP}.p{}", &digest(&[package])[..12])
}

/// Replaces every candidate coordinate, relocated package and free-text
/// detail with stable hashes. Counts are unchanged.
pub fn mask_report(report: &PipelineReport) -> PipelineReport {
    let mut masked = report.clone();
    let mask_clone = |clone: &mut ArtifactCloneReport| {
        clone.candidate = mask_gav(&clone.candidate);
        clone.relocation = clone.relocation.map_values(|to| {
            let package = if clone.is_shaded { mask_package(&to.package) } else { to.package.clone() };
            QualifiedClassName::new(package, to.simple_name.clone())
        });
    };
    for clone in &mut masked.clones {
        mask_clone(clone);
    }
    for confirmed in &mut masked.confirmed {
        confirmed.gav = mask_gav(&confirmed.gav);
        mask_clone(&mut confirmed.clone);
        confirmed.verification.candidate = mask_gav(&confirmed.verification.candidate);
        for outcome in &mut confirmed.verification.outcomes {
            outcome.message = None;
        }
    }
    for removal in &mut masked.removals {
        removal.gav = mask_gav(&removal.gav);
        removal.detail = None;
    }
    masked.removals.sort();
    masked.confirmed_ga = aggregate_by_ga(masked.confirmed.iter().map(|c| &c.gav));
    masked.masked = true;
    masked
}

/// Writes the report in each requested format.
pub fn emit_report(report: &PipelineReport, outputs: &[(ReportFormat, &Path)]) -> std::io::Result<()> {
    for (format, path) in outputs {
        let text = match format {
            ReportFormat::Json => render_json(report),
            ReportFormat::TextTable => render_table(report),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, text)?;
    }
    Ok(())
}
