use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use shadescan_core::pipeline::{BackendKind, PipelineConfig, RunnerKind};
use shadescan_core::registry::Gav;

/// `scan` settings read from a TOML file. Every key is optional; command-line
/// flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub original: Option<Gav>,
    pub cve: Option<String>,
    pub pov: Option<PathBuf>,
    pub classes: Option<usize>,
    pub query_classes: Option<Vec<String>>,
    pub page_size: Option<usize>,
    pub pages: Option<usize>,
    pub threshold: Option<usize>,
    pub min_cloned: Option<usize>,
    pub workers: Option<usize>,
    pub build_workers: Option<usize>,
    pub backend: Option<BackendKind>,
    pub fixture_root: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub runner: Option<RunnerKind>,
    pub stub_script: Option<PathBuf>,
    pub build_timeout: Option<u64>,
    pub work_dir: Option<PathBuf>,
    pub mask: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Relative paths in the file are taken relative to the file.
    pub fn resolve_paths(mut self, base: &Path) -> Self {
        for path in [
            &mut self.pov,
            &mut self.fixture_root,
            &mut self.cache_dir,
            &mut self.stub_script,
            &mut self.work_dir,
        ]
        .into_iter()
        .flatten()
        {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        self
    }
}

/// `scan` flags as parsed; `None` means not given.
#[derive(Debug, Default)]
pub struct ScanOverrides {
    pub original: Option<Gav>,
    pub cve: Option<String>,
    pub pov: Option<PathBuf>,
    pub classes: Option<usize>,
    pub query_classes: Vec<String>,
    pub page_size: Option<usize>,
    pub pages: Option<usize>,
    pub threshold: Option<usize>,
    pub min_cloned: Option<usize>,
    pub workers: Option<usize>,
    pub build_workers: Option<usize>,
    pub backend: Option<BackendKind>,
    pub fixture_root: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    pub runner: Option<RunnerKind>,
    pub stub_script: Option<PathBuf>,
    pub build_timeout: Option<u64>,
    pub work_dir: Option<PathBuf>,
    pub mask: bool,
}

/// Flags over file over defaults. Returns the config and the masking choice.
pub fn merge(flags: ScanOverrides, file: FileConfig, default_cache: Option<PathBuf>) -> Result<(PipelineConfig, bool)> {
    let original = flags
        .original
        .or(file.original)
        .context("the original artifact is required (--original G:A:V)")?;
    let cve = flags.cve.or(file.cve).context("a CVE identifier is required (--cve)")?;
    let mut config = PipelineConfig::new(original, cve);
    config.pov_dir = flags.pov.or(file.pov);
    macro_rules! pick {
        ($field:ident, $flag:ident) => {
            if let Some(value) = flags.$flag.or(file.$flag) {
                config.$field = value;
            }
        };
    }
    pick!(query_class_count, classes);
    pick!(page_size, page_size);
    pick!(max_pages, pages);
    pick!(consolidation_threshold, threshold);
    pick!(min_cloned_classes, min_cloned);
    pick!(worker_count, workers);
    pick!(build_worker_count, build_workers);
    pick!(backend, backend);
    pick!(runner, runner);
    pick!(build_timeout_secs, build_timeout);
    config.query_classes = if flags.query_classes.is_empty() {
        file.query_classes.unwrap_or_default()
    } else {
        flags.query_classes
    };
    config.fixture_root = flags.fixture_root.or(file.fixture_root);
    if config.fixture_root.is_some() && flags.backend.is_none() && file.backend.is_none() {
        config.backend = BackendKind::Fixture;
    }
    config.cache_dir = if flags.no_cache {
        None
    } else {
        flags.cache_dir.or(file.cache_dir).or(default_cache)
    };
    config.stub_script = flags.stub_script.or(file.stub_script);
    config.work_dir = flags.work_dir.or(file.work_dir);
    let mask = flags.mask || file.mask.unwrap_or(false);
    config.validate()?;
    Ok((config, mask))
}
