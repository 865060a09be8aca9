use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PovError;
use crate::clone::lexer::{lex, RawKind};
use crate::pom::{parse_pom, DependencySection};
use crate::registry::Gav;

pub const METADATA_FILE: &str = "pov.json";
pub const METADATA_SCHEMA_VERSION: u32 = 1;
pub const TEST_SOURCES: &str = "src/test/java";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    /// The test passes when the vulnerability is present.
    Success,
    /// The test fails when the vulnerability is present (regression tests).
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedTest {
    pub signal: Signal,
    /// The test is guarded by a runtime assumption and may be skipped.
    #[serde(default)]
    pub skippable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    /// False when the platform is known not to satisfy the assumptions of
    /// skippable tests.
    pub assumptions_met: bool,
}

impl Default for Environment {
    fn default() -> Self {
        Self { assumptions_met: true }
    }
}

/// What a run must observe for the vulnerability to count as present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectations {
    /// Keyed by `package.Class#method`.
    pub tests: BTreeMap<String, ExpectedTest>,
    #[serde(default)]
    pub environment: Environment,
}

/// Contents of `pov.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PovMetadata {
    pub schema_version: u32,
    pub cve: String,
    pub original: Gav,
    #[serde(flatten)]
    pub expectations: Expectations,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub payload_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PovProject {
    pub root_dir: PathBuf,
    pub cve_id: String,
    pub original: Gav,
    pub expectations: Expectations,
    pub payload_files: Vec<PathBuf>,
}

impl PovProject {
    pub fn metadata(&self) -> PovMetadata {
        PovMetadata {
            schema_version: METADATA_SCHEMA_VERSION,
            cve: self.cve_id.clone(),
            original: self.original.clone(),
            expectations: self.expectations.clone(),
            payload_files: self
                .payload_files
                .iter()
                .map(|p| p.to_string_lossy().replace('\\', "/"))
                .collect(),
        }
    }
}

fn is_cve_id(id: &str) -> bool {
    let mut parts = id.splitn(3, '-');
    parts.next() == Some("CVE")
        && parts.next().is_some_and(|y| y.len() == 4 && y.bytes().all(|b| b.is_ascii_digit()))
        && parts.next().is_some_and(|n| n.len() >= 4 && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Splits `pkg.Class#method` into the test source path and the method name.
fn test_location(test_id: &str) -> Option<(PathBuf, &str)> {
    let (class, method) = test_id.split_once('#')?;
    if class.is_empty() || method.is_empty() {
        return None;
    }
    Some((
        Path::new(TEST_SOURCES).join(format!("{}.java", class.replace('.', "/"))),
        method,
    ))
}

/// True when `source` declares a method called `method`.
fn declares_method(source: &str, method: &str) -> bool {
    let Ok(tokens) = lex(source) else {
        return false;
    };
    tokens.windows(2).any(|w| {
        w[0].kind == RawKind::Identifier && w[0].text == method && w[1].is_punct("(")
    })
}

pub fn load_pov(root_dir: impl AsRef<Path>) -> Result<PovProject, PovError> {
    let root = root_dir.as_ref();
    let metadata_path = root.join(METADATA_FILE);
    let raw = fs::read(&metadata_path).map_err(|e| PovError::MissingMetadata {
        path: metadata_path.clone(),
        message: e.to_string(),
    })?;
    let metadata: PovMetadata = serde_json::from_slice(&raw).map_err(|e| PovError::MissingMetadata {
        path: metadata_path.clone(),
        message: e.to_string(),
    })?;
    let invalid = |message: String| PovError::InvalidProject {
        root: root.to_path_buf(),
        message,
    };
    if metadata.schema_version != METADATA_SCHEMA_VERSION {
        return Err(invalid(format!("unsupported schema version {}", metadata.schema_version)));
    }
    if !is_cve_id(&metadata.cve) {
        return Err(invalid(format!("{:?} is not a CVE identifier", metadata.cve)));
    }
    if metadata.expectations.tests.is_empty() {
        return Err(invalid("no expected test signals".into()));
    }

    let pom_bytes = fs::read(root.join("pom.xml")).map_err(|e| invalid(format!("pom.xml: {e}")))?;
    let pom = parse_pom(&pom_bytes).map_err(|e| invalid(format!("pom.xml: {e}")))?;
    let original = metadata.original.ga();
    if !pom
        .declared_dependencies
        .iter()
        .any(|d| d.section == DependencySection::Dependencies && original.matches(&d.group, &d.artifact))
    {
        return Err(invalid(format!("pom.xml does not depend on {original}")));
    }

    for test_id in metadata.expectations.tests.keys() {
        let unknown = || PovError::UnknownTest { test_id: test_id.clone() };
        let (path, method) = test_location(test_id).ok_or_else(unknown)?;
        let source = fs::read_to_string(root.join(&path)).map_err(|_| unknown())?;
        if !declares_method(&source, method) {
            return Err(unknown());
        }
    }
    let payload_files: Vec<PathBuf> = metadata.payload_files.iter().map(PathBuf::from).collect();
    if let Some(missing) = payload_files.iter().find(|p| !root.join(p).is_file()) {
        return Err(invalid(format!("payload {} not found", missing.display())));
    }

    Ok(PovProject {
        root_dir: root.to_path_buf(),
        cve_id: metadata.cve,
        original: metadata.original,
        expectations: metadata.expectations,
        payload_files,
    })
}
