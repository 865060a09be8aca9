use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::report::{ConfigEcho, ConfirmedClone, PipelineReport, Removal, REPORT_SCHEMA_VERSION};
use super::stats::{aggregate_by_ga, consolidate, Stage, StageStats};
use super::{BackendKind, PipelineConfig, PipelineError, RunnerKind};
use crate::clone::{detect_artifact_clone, ArtifactCloneReport, CloneConfig, SourceSet};
use crate::fingerprint::{list_class_names, select_query_classes};
use crate::pom::{parse_pom, references_original, resolve_parent_chain, MatchedPattern, MAX_PARENT_DEPTH};
use crate::pov::{instantiate, load_pov, self_check, verify, BuildRunner, MavenRunner, PovProject, StubRunner, VerificationResult};
use crate::registry::{Cache, FixtureBackend, Gav, LiveBackend, LiveConfig, Registry, RegistryError};

/// Stub runner script looked up at the fixture root.
pub const STUB_SCRIPT_FILE: &str = "stub-runner.json";

const VERIFICATION_RECORDS: &str = "verification";

pub struct Pipeline {
    config: PipelineConfig,
    registry: Registry,
    runner: Option<Box<dyn BuildRunner>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, registry: Registry) -> Self {
        Self {
            config,
            registry,
            runner: None,
        }
    }

    pub fn with_runner(mut self, runner: Box<dyn BuildRunner>) -> Self {
        self.runner = Some(runner);
        self
    }

    /// Registry and build runner as selected by the configuration.
    pub fn from_config(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let mut registry = match config.backend {
            BackendKind::Live => Registry::new(LiveBackend::new(LiveConfig::default())?),
            BackendKind::Fixture => {
                let root = config.fixture_root.as_ref().expect("validated");
                Registry::new(FixtureBackend::open(root)?)
            }
        };
        if let Some(dir) = &config.cache_dir {
            registry = registry.with_cache(Cache::open(dir)?);
        }
        let stub = match config.runner {
            RunnerKind::Auto => config.backend == BackendKind::Fixture,
            RunnerKind::Stub => true,
            RunnerKind::Maven => false,
        };
        let runner: Box<dyn BuildRunner> = if stub {
            let script = config
                .stub_script
                .clone()
                .or_else(|| config.fixture_root.as_ref().map(|r| r.join(STUB_SCRIPT_FILE)));
            match script.filter(|p| p.is_file()) {
                Some(path) => Box::new(StubRunner::from_file(&path)?),
                None => {
                    log::warn!("no stub runner script; POV tests will produce no reports");
                    Box::new(StubRunner::default())
                }
            }
        } else {
            Box::new(MavenRunner {
                local_repository: config.cache_dir.as_ref().map(|d| d.join("m2")),
                timeout: Duration::from_secs(config.build_timeout_secs),
                ..MavenRunner::default()
            })
        };
        Ok(Self::new(config, registry).with_runner(runner))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn run(&self) -> Result<PipelineReport, PipelineError> {
        let started = Instant::now();
        let config = &self.config;
        config.validate()?;
        let pool = thread_pool(config.worker_count)?;
        let build_pool = thread_pool(config.build_worker_count)?;

        let pov = config.pov_dir.as_ref().map(load_pov).transpose()?;
        let runner = match (&pov, &self.runner) {
            (Some(_), None) => return Err(PipelineError::Config("a POV needs a build runner".into())),
            (_, runner) => runner.as_deref(),
        };
        if let Some(pov) = &pov {
            if pov.original.ga() != config.original.ga() {
                return Err(PipelineError::Config(format!(
                    "POV targets {}, not {}",
                    pov.original, config.original
                )));
            }
        }

        let original_binary = self.registry.fetch_binary(&config.original).map_err(|e| match e {
            RegistryError::NotFound { .. } => PipelineError::OriginalNotFound {
                gav: config.original.clone(),
                message: e.to_string(),
            },
            other => PipelineError::Registry(other),
        })?;
        let class_names = list_class_names(&original_binary).map_err(|e| PipelineError::OriginalUnusable {
            gav: config.original.clone(),
            message: e.to_string(),
        })?;
        let query_classes = if config.query_classes.is_empty() {
            select_query_classes(&class_names, config.query_class_count)
        } else {
            config.query_classes.clone()
        };
        log::info!(
            "{}: {} classes, querying {:?}",
            config.original,
            class_names.len(),
            query_classes
        );

        let work = WorkRoot::new(config.work_dir.as_deref())?;
        if let (Some(pov), Some(runner)) = (&pov, runner) {
            let result = self_check(pov, runner, &work.fresh("self-check")?)?;
            log::info!("POV self-check passed with {} outcomes", result.outcomes.len());
        }

        let match_sets: Vec<(String, Vec<Gav>)> = pool.install(|| {
            query_classes
                .par_iter()
                .map(|class| {
                    self.registry
                        .search_by_class(class, config.max_pages, config.page_size)
                        .map(|gavs| (class.clone(), gavs))
                })
                .collect::<Result<_, _>>()
        })?;
        let query_results: BTreeSet<Gav> = match_sets.iter().flat_map(|(_, g)| g.iter().cloned()).collect();
        let consolidated = consolidate(&match_sets, config.consolidation_threshold);

        let mut removals: Vec<Removal> = query_results
            .difference(&consolidated)
            .map(|gav| Removal::new(gav.clone(), Stage::Consolidated, "below-threshold", None))
            .collect();

        let original_sources = if consolidated.is_empty() {
            None
        } else {
            let blob = self.registry.fetch_sources(&config.original).map_err(|e| PipelineError::OriginalUnusable {
                gav: config.original.clone(),
                message: e.to_string(),
            })?;
            let sources = SourceSet::from_archive(config.original.clone(), &blob.bytes).map_err(|e| {
                PipelineError::OriginalUnusable {
                    gav: config.original.clone(),
                    message: e.to_string(),
                }
            })?;
            Some(sources)
        };

        let clone_config = CloneConfig {
            min_cloned_classes: config.min_cloned_classes,
        };
        let screened: Vec<Result<ArtifactCloneReport, Removal>> = match &original_sources {
            None => Vec::new(),
            Some(original) => pool.install(|| {
                consolidated
                    .par_iter()
                    .map(|gav| self.screen(gav, original, &query_classes, &clone_config))
                    .collect()
            }),
        };
        let mut clones = Vec::new();
        for outcome in screened {
            match outcome {
                Ok(report) => clones.push(report),
                Err(removal) => removals.push(removal),
            }
        }

        let mut confirmed = Vec::new();
        let mut verified: Vec<(Gav, VerificationResult)> = Vec::new();
        if let (Some(pov), Some(runner)) = (&pov, runner) {
            let results: Vec<Result<VerificationResult, Removal>> = build_pool.install(|| {
                clones
                    .par_iter()
                    .map(|clone| self.verify_candidate(pov, runner, clone, &work))
                    .collect()
            });
            for (clone, result) in clones.iter().zip(results) {
                match result {
                    Err(removal) => removals.push(removal),
                    Ok(v) if !v.compiled => {
                        removals.push(Removal::new(clone.candidate.clone(), Stage::PovCompilable, "compile-failed", None))
                    }
                    Ok(v) if !v.tested => {
                        removals.push(Removal::new(clone.candidate.clone(), Stage::PovTestable, "no-test-results", None))
                    }
                    Ok(v) if !v.confirmed => {
                        let observed = v
                            .outcomes
                            .iter()
                            .map(|o| format!("{}={}", o.test_id, o.state))
                            .collect::<Vec<_>>()
                            .join(", ");
                        removals.push(Removal::new(
                            clone.candidate.clone(),
                            Stage::VulnerabilityConfirmed,
                            "signal-mismatch",
                            Some(observed),
                        ));
                        verified.push((clone.candidate.clone(), v));
                    }
                    Ok(v) => {
                        confirmed.push(ConfirmedClone {
                            gav: clone.candidate.clone(),
                            clone: clone.clone(),
                            verification: v.clone(),
                        });
                        verified.push((clone.candidate.clone(), v));
                    }
                }
            }
        }
        removals.sort();

        let with_pov = pov.is_some();
        let mut survivors: BTreeMap<Stage, BTreeSet<Gav>> = BTreeMap::new();
        let mut alive = query_results.clone();
        for stage in Stage::ALL {
            if stage == Stage::Shaded {
                continue;
            }
            if stage.needs_pov() && !with_pov {
                break;
            }
            for removal in removals.iter().filter(|r| r.stage == stage) {
                alive.remove(&removal.gav);
            }
            survivors.insert(stage, alive.clone());
        }
        if with_pov {
            survivors.insert(
                Stage::Shaded,
                confirmed.iter().filter(|c| c.clone.is_shaded).map(|c| c.gav.clone()).collect(),
            );
        }
        let stage_stats = StageStats::from_survivors(&survivors, with_pov);
        debug_assert!(stage_stats.is_monotone(), "{stage_stats:?}");

        let report = PipelineReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config: ConfigEcho::from(config),
            original_classes: class_names.len(),
            query_classes,
            stage_stats,
            stage_stats_by_ga: StageStats::from_survivors_by_ga(&survivors, with_pov),
            confirmed_ga: aggregate_by_ga(confirmed.iter().map(|c| &c.gav)),
            clones,
            confirmed,
            removals,
            masked: false,
        };
        let registry = self.registry.stats();
        log::info!(
            "done in {:.1?}: {} backend reads, {} cache hits",
            started.elapsed(),
            registry.backend_reads,
            registry.cache_hits
        );
        Ok(report)
    }

    /// Pom, dependency, sources and clone stages for one candidate.
    fn screen(
        &self,
        gav: &Gav,
        original: &SourceSet,
        query_classes: &[String],
        clone_config: &CloneConfig,
    ) -> Result<ArtifactCloneReport, Removal> {
        let removal = |stage, cause: &str, detail: String| Removal::new(gav.clone(), stage, cause, Some(detail));
        let pom = self
            .registry
            .fetch_pom(gav)
            .map_err(|e| removal(Stage::ValidPom, "pom-unavailable", e.to_string()))?;
        let pom = parse_pom(&pom.bytes).map_err(|e| removal(Stage::ValidPom, "pom-malformed", e.to_string()))?;

        let chain = resolve_parent_chain(&self.registry, pom, MAX_PARENT_DEPTH);
        let verdict = references_original(gav, &chain, &self.config.original.ga());
        if verdict.refers_to_original {
            let cause = match (verdict.matched_pattern, verdict.via_parent) {
                (MatchedPattern::SameGa, _) => "same-ga",
                (MatchedPattern::DependencySection, false) => "declares-dependency",
                (MatchedPattern::ShadePluginSection, false) => "shades-dependency",
                (_, true) => "parent-references-original",
                (MatchedPattern::None, false) => unreachable!("refers_to_original implies a pattern"),
            };
            return Err(Removal::new(gav.clone(), Stage::NoDependency, cause, None));
        }

        let sources = self
            .registry
            .fetch_sources(gav)
            .map_err(|e| removal(Stage::SourcesAcquired, "sources-unavailable", e.to_string()))?;
        let sources = SourceSet::from_archive(gav.clone(), &sources.bytes)
            .map_err(|e| removal(Stage::SourcesAcquired, "sources-corrupt", e.to_string()))?;

        let report = detect_artifact_clone(original, &sources, query_classes, clone_config);
        if !report.verdict {
            return Err(removal(
                Stage::ClonesDetected,
                "not-a-clone",
                format!(
                    "{} cloned classes, {} query classes matched",
                    report.cloned_classes, report.matched_query_classes
                ),
            ));
        }
        Ok(report)
    }

    fn verify_candidate(
        &self,
        pov: &PovProject,
        runner: &dyn BuildRunner,
        clone: &ArtifactCloneReport,
        work: &WorkRoot,
    ) -> Result<VerificationResult, Removal> {
        let gav = &clone.candidate;
        let io_removal = |e: std::io::Error| Removal::new(gav.clone(), Stage::PovCompilable, "workspace-error", Some(e.to_string()));
        let workspace = work.fresh(&slug(gav)).map_err(io_removal)?;
        let instance = instantiate(pov, gav, &clone.relocation, &workspace).map_err(|e| {
            Removal::new(gav.clone(), Stage::PovCompilable, "instantiation-failed", Some(e.to_string()))
        })?;
        log::debug!(
            "{gav}: {} imports and {} references rewritten",
            instance.rewritten_imports,
            instance.rewritten_references
        );

        let cache = self.registry.cache().filter(|_| runner.cacheable());
        let key = match cache {
            Some(_) => Some(workspace_key(&pov.cve_id, runner.name(), gav, &workspace).map_err(io_removal)?),
            None => None,
        };
        if let (Some(cache), Some(key)) = (cache, &key) {
            if let Ok(Some(result)) = cache.get_record::<VerificationResult>(VERIFICATION_RECORDS, key) {
                return Ok(result);
            }
        }
        let result = verify(&instance, runner);
        if let (Some(cache), Some(key)) = (cache, &key) {
            if let Err(err) = cache.put_record(VERIFICATION_RECORDS, key, &result) {
                log::warn!("{gav}: verification not cached: {err}");
            }
        }
        Ok(result)
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    Pipeline::from_config(config.clone())?.run()
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

fn slug(gav: &Gav) -> String {
    gav.to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Digest of everything that determines a verification result.
fn workspace_key(cve: &str, runner: &str, gav: &Gav, workspace: &Path) -> std::io::Result<String> {
    let mut hasher = Sha256::new();
    for part in [cve, runner, &gav.to_string()] {
        hasher.update(part.as_bytes());
        hasher.update([0]);
    }
    for entry in WalkDir::new(workspace).sort_by_file_name() {
        let entry = entry?;
        if entry.file_type().is_file() {
            let relative = entry.path().strip_prefix(workspace).unwrap_or(entry.path());
            hasher.update(relative.to_string_lossy().as_bytes());
            hasher.update([0]);
            hasher.update(fs::read(entry.path())?);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Parent directory of instance workspaces.
struct WorkRoot {
    path: PathBuf,
    _temp: Option<tempfile::TempDir>,
}

impl WorkRoot {
    fn new(dir: Option<&Path>) -> std::io::Result<Self> {
        match dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Self {
                    path: dir.to_path_buf(),
                    _temp: None,
                })
            }
            None => {
                let temp = tempfile::Builder::new().prefix("shadescan-").tempdir()?;
                Ok(Self {
                    path: temp.path().to_path_buf(),
                    _temp: Some(temp),
                })
            }
        }
    }

    /// An empty directory for one instance, replacing any previous one.
    fn fresh(&self, name: &str) -> std::io::Result<PathBuf> {
        let dir = self.path.join(name);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}
