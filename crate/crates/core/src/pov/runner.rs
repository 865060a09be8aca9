use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::instantiate::PovInstance;
use super::surefire::{ReportBundle, ReportFile};
use crate::clone::lexer::{lex, RawKind};
use crate::pom::{parse_pom, DependencySection};
use crate::registry::Gav;

pub const DEFAULT_BUILD_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Compile,
    Test,
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("{phase:?} timed out after {after:?}")]
    Timeout { phase: Phase, after: Duration },
    #[error("{phase:?} crashed: {message}")]
    Crash { phase: Phase, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuildOutput {
    Compiled(bool),
    Tested(ReportBundle),
}

/// Builds and tests instance workspaces.
pub trait BuildRunner: Send + Sync {
    fn name(&self) -> &str;

    fn compile(&self, instance: &PovInstance) -> Result<bool, RunnerError>;

    /// Runs the tests and returns their surefire reports, whatever the outcome.
    fn test(&self, instance: &PovInstance) -> Result<ReportBundle, RunnerError>;

    /// Whether error outcomes may be transient and deserve one rerun.
    fn retries_errors(&self) -> bool {
        false
    }

    /// Whether results may be reused for an identical workspace.
    fn cacheable(&self) -> bool {
        false
    }
}

pub fn run_build(instance: &PovInstance, runner: &dyn BuildRunner, phase: Phase) -> Result<BuildOutput, RunnerError> {
    match phase {
        Phase::Compile => runner.compile(instance).map(BuildOutput::Compiled),
        Phase::Test => runner.test(instance).map(BuildOutput::Tested),
    }
}

/// Runs Maven as a subprocess in the instance workspace.
#[derive(Debug, Clone)]
pub struct MavenRunner {
    pub executable: PathBuf,
    pub local_repository: Option<PathBuf>,
    pub timeout: Duration,
    pub offline: bool,
}

impl Default for MavenRunner {
    fn default() -> Self {
        Self {
            executable: PathBuf::from("mvn"),
            local_repository: None,
            timeout: DEFAULT_BUILD_TIMEOUT,
            offline: false,
        }
    }
}

impl MavenRunner {
    fn run(&self, workspace: &Path, phase: Phase, goal_args: &[&str]) -> Result<bool, RunnerError> {
        let crash = |message: String| RunnerError::Crash { phase, message };
        let log_dir = workspace.join("target");
        fs::create_dir_all(&log_dir).map_err(|e| crash(e.to_string()))?;
        let log_path = log_dir.join(format!("shadescan-{}.log", goal_args[0]));
        let log = File::create(&log_path).map_err(|e| crash(e.to_string()))?;
        let mut command = Command::new(&self.executable);
        command.arg("-B").args(goal_args).current_dir(workspace);
        if let Some(repo) = &self.local_repository {
            command.arg(format!("-Dmaven.repo.local={}", repo.display()));
        }
        if self.offline {
            command.arg("-o");
        }
        let mut child = command
            .stdin(Stdio::null())
            .stdout(log.try_clone().map_err(|e| crash(e.to_string()))?)
            .stderr(log)
            .spawn()
            .map_err(|e| crash(format!("{}: {e}", self.executable.display())))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            match child.try_wait().map_err(|e| crash(e.to_string()))? {
                Some(status) => return Ok(status.success()),
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(RunnerError::Timeout {
                        phase,
                        after: self.timeout,
                    });
                }
                None => thread::sleep(Duration::from_millis(100)),
            }
        }
    }
}

impl BuildRunner for MavenRunner {
    fn name(&self) -> &str {
        "maven"
    }

    // test-compile, since POV sources are tests
    fn compile(&self, instance: &PovInstance) -> Result<bool, RunnerError> {
        self.run(&instance.workspace, Phase::Compile, &["test-compile"])
    }

    fn test(&self, instance: &PovInstance) -> Result<ReportBundle, RunnerError> {
        let ok = self.run(&instance.workspace, Phase::Test, &["test", "-Dmaven.test.failure.ignore=true"])?;
        let reports = read_reports(&instance.workspace.join("target/surefire-reports")).map_err(|e| RunnerError::Crash {
            phase: Phase::Test,
            message: e.to_string(),
        })?;
        if !ok && reports.is_empty() {
            return Err(RunnerError::Crash {
                phase: Phase::Test,
                message: "build failed without test reports".into(),
            });
        }
        Ok(reports)
    }

    fn retries_errors(&self) -> bool {
        true
    }

    fn cacheable(&self) -> bool {
        true
    }
}

/// `TEST-*.xml` files of a surefire report directory, by name.
pub fn read_reports(dir: &Path) -> std::io::Result<ReportBundle> {
    let mut files = Vec::new();
    if !dir.is_dir() {
        return Ok(ReportBundle { files });
    }
    for entry in WalkDir::new(dir).max_depth(1).sort_by_file_name() {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if entry.file_type().is_file() && name.starts_with("TEST-") && name.ends_with(".xml") {
            files.push(ReportFile {
                content: fs::read_to_string(entry.path())?,
                name,
            });
        }
    }
    Ok(ReportBundle { files })
}

/// Canned behaviour for one target artifact.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubTarget {
    #[serde(default = "yes")]
    pub compiles: bool,
    #[serde(default)]
    pub reports: Vec<ReportFile>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StubScript {
    pub targets: BTreeMap<Gav, StubTarget>,
}

/// Replays canned results without spawning anything.
///
/// Compilation succeeds when the workspace passes [`syntactic_check`] and the
/// script does not say otherwise. Targets absent from the script produce no
/// test reports.
#[derive(Debug, Default)]
pub struct StubRunner {
    script: StubScript,
    invocations: AtomicUsize,
}

impl StubRunner {
    pub fn new(script: StubScript) -> Self {
        Self {
            script,
            invocations: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let script = serde_json::from_slice(&fs::read(path)?)?;
        Ok(Self::new(script))
    }

    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::Relaxed)
    }
}

impl BuildRunner for StubRunner {
    fn name(&self) -> &str {
        "stub"
    }

    fn compile(&self, instance: &PovInstance) -> Result<bool, RunnerError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        if let Err(message) = syntactic_check(&instance.workspace, &instance.target) {
            log::info!("{}: {message}", instance.target);
            return Ok(false);
        }
        Ok(self.script.targets.get(&instance.target).map_or(true, |t| t.compiles))
    }

    fn test(&self, instance: &PovInstance) -> Result<ReportBundle, RunnerError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        Ok(ReportBundle {
            files: self
                .script
                .targets
                .get(&instance.target)
                .map(|t| t.reports.clone())
                .unwrap_or_default(),
        })
    }
}

/// Checks that the pom depends on `target` and that every Java source lexes
/// with balanced brackets.
pub fn syntactic_check(workspace: &Path, target: &Gav) -> Result<(), String> {
    let pom = fs::read(workspace.join("pom.xml")).map_err(|e| format!("pom.xml: {e}"))?;
    let pom = parse_pom(&pom).map_err(|e| format!("pom.xml: {e}"))?;
    let depends = pom.declared_dependencies.iter().any(|d| {
        d.section == DependencySection::Dependencies
            && target.ga().matches(&d.group, &d.artifact)
            && d.version.as_deref() == Some(target.version())
    });
    if !depends {
        return Err(format!("pom.xml does not depend on {target}"));
    }
    let sources = WalkDir::new(workspace.join("src"))
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"));
    for entry in sources {
        let name = entry.path().strip_prefix(workspace).unwrap_or(entry.path()).display().to_string();
        let text = fs::read_to_string(entry.path()).map_err(|e| format!("{name}: {e}"))?;
        let tokens = lex(&text).map_err(|e| format!("{name}:{e}"))?;
        let mut open = Vec::new();
        for tok in tokens.iter().filter(|t| t.kind == RawKind::Punct) {
            match tok.text {
                "(" | "[" | "{" => open.push(tok.text),
                ")" | "]" | "}" => {
                    let expected = match tok.text {
                        ")" => "(",
                        "]" => "[",
                        _ => "{",
                    };
                    if open.pop() != Some(expected) {
                        return Err(format!("{name}: unbalanced {:?} at byte {}", tok.text, tok.start));
                    }
                }
                _ => {}
            }
        }
        if let Some(unclosed) = open.last() {
            return Err(format!("{name}: unclosed {unclosed:?}"));
        }
    }
    Ok(())
}
