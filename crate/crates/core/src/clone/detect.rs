use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Cursor, Read};

use serde::{Deserialize, Serialize};

use super::normalize::{normalize, NormalizedUnit};
use crate::fingerprint::QualifiedClassName;
use crate::registry::Gav;

/// Source extensions of other JVM languages, skipped with a diagnostic.
const OTHER_JVM_SOURCES: &[&str] = &[".kt", ".kts", ".scala", ".groovy", ".clj"];

#[derive(Debug, thiserror::Error)]
pub enum CloneError {
    #[error("corrupt sources archive: {0}")]
    CorruptArchive(String),
    #[error("relocation of {from} to {to} {reason}")]
    Relocation {
        from: QualifiedClassName,
        to: QualifiedClassName,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloneConfig {
    /// Minimum number of cloned classes for an artifact-level verdict.
    pub min_cloned_classes: usize,
}

impl Default for CloneConfig {
    fn default() -> Self {
        Self { min_cloned_classes: 2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDiagnostics {
    pub units: usize,
    pub lex_errors: usize,
    pub other_language: usize,
}

/// Normalized sources of one artifact.
#[derive(Debug, Clone)]
pub struct SourceSet {
    pub gav: Gav,
    pub units: Vec<NormalizedUnit>,
    pub diagnostics: SourceDiagnostics,
}

impl SourceSet {
    pub fn from_units(gav: Gav, units: Vec<NormalizedUnit>) -> Self {
        let diagnostics = SourceDiagnostics {
            units: units.len(),
            ..SourceDiagnostics::default()
        };
        Self { gav, units, diagnostics }
    }

    /// Unpacks and normalizes every `.java` member of a sources archive.
    pub fn from_archive(gav: Gav, bytes: &[u8]) -> Result<Self, CloneError> {
        let mut archive =
            zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| CloneError::CorruptArchive(e.to_string()))?;
        let mut diagnostics = SourceDiagnostics::default();
        let mut units = Vec::new();
        for index in 0..archive.len() {
            let mut entry = archive
                .by_index(index)
                .map_err(|e| CloneError::CorruptArchive(e.to_string()))?;
            let name = entry.name().to_string();
            if OTHER_JVM_SOURCES.iter().any(|ext| name.ends_with(ext)) {
                diagnostics.other_language += 1;
                continue;
            }
            let Some(stem) = name.strip_suffix(".java") else {
                continue;
            };
            if stem.ends_with("package-info") || stem.ends_with("module-info") {
                continue;
            }
            let mut raw = Vec::new();
            entry
                .read_to_end(&mut raw)
                .map_err(|e| CloneError::CorruptArchive(format!("{name}: {e}")))?;
            match normalize(&String::from_utf8_lossy(&raw), &name) {
                Ok(unit) => units.push(unit),
                Err(err) => {
                    log::debug!("{gav}: {name}: {err}");
                    diagnostics.lex_errors += 1;
                }
            }
        }
        if diagnostics.lex_errors + diagnostics.other_language > 0 {
            log::info!(
                "{gav}: skipped {} unlexable and {} non-Java sources",
                diagnostics.lex_errors,
                diagnostics.other_language
            );
        }
        diagnostics.units = units.len();
        units.sort_by(|a, b| a.origin_path.cmp(&b.origin_path));
        Ok(Self { gav, units, diagnostics })
    }

    pub fn class_names(&self) -> BTreeSet<QualifiedClassName> {
        self.units.iter().map(class_of).collect()
    }
}

pub(crate) fn class_of(unit: &NormalizedUnit) -> QualifiedClassName {
    QualifiedClassName::new(unit.package_decl.clone(), unit.primary_name())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCloneVerdict {
    pub original: QualifiedClassName,
    pub candidate: QualifiedClassName,
    pub is_clone: bool,
    pub mismatch_position: Option<usize>,
}

/// Element-wise comparison of two normalized token streams.
pub fn compare_units(a: &NormalizedUnit, b: &NormalizedUnit) -> ClassCloneVerdict {
    let mismatch = a
        .tokens
        .iter()
        .zip(&b.tokens)
        .position(|(x, y)| x != y)
        .or_else(|| (a.tokens.len() != b.tokens.len()).then(|| a.tokens.len().min(b.tokens.len())));
    ClassCloneVerdict {
        original: class_of(a),
        candidate: class_of(b),
        is_clone: mismatch.is_none(),
        mismatch_position: mismatch,
    }
}

/// Injective mapping from original classes to their copies in a candidate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelocationMap {
    entries: BTreeMap<QualifiedClassName, QualifiedClassName>,
}

impl RelocationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, from: QualifiedClassName, to: QualifiedClassName) -> Result<(), CloneError> {
        let fail = |reason| CloneError::Relocation {
            from: from.clone(),
            to: to.clone(),
            reason,
        };
        if from.simple_name != to.simple_name {
            return Err(fail("changes the simple name"));
        }
        if self.entries.contains_key(&from) {
            return Err(fail("maps an already mapped class"));
        }
        if self.entries.values().any(|v| *v == to) {
            return Err(fail("reuses a mapped target"));
        }
        self.entries.insert(from, to);
        Ok(())
    }

    pub fn get(&self, class: &QualifiedClassName) -> Option<&QualifiedClassName> {
        self.entries.get(class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QualifiedClassName, &QualifiedClassName)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when no entry moves a class to another package.
    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|(k, v)| k.package == v.package)
    }

    /// Original package to the set of packages its classes moved to.
    pub fn package_moves(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (k, v) in &self.entries {
            out.entry(k.package.as_str()).or_default().insert(v.package.as_str());
        }
        out
    }

    pub fn map_values(&self, mut f: impl FnMut(&QualifiedClassName) -> QualifiedClassName) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactCloneReport {
    pub original: Gav,
    pub candidate: Gav,
    pub matched_query_classes: usize,
    pub cloned_classes: usize,
    pub relocation: RelocationMap,
    pub is_shaded: bool,
    pub verdict: bool,
}

/// Package rewrite implied by moving `from` to `to`: both packages with their
/// common trailing segments removed, e.g. `org.yaml` to `shaded.org.yaml`
/// gives (``, `shaded`).
pub(crate) fn package_rewrite(from: &str, to: &str) -> (String, String) {
    let split = |p: &str| -> Vec<String> {
        if p.is_empty() {
            Vec::new()
        } else {
            p.split('.').map(str::to_string).collect()
        }
    };
    let (mut a, mut b) = (split(from), split(to));
    while let (Some(x), Some(y)) = (a.last(), b.last()) {
        if x != y {
            break;
        }
        a.pop();
        b.pop();
    }
    (a.join("."), b.join("."))
}

/// Compares an original artifact's sources against a candidate's.
///
/// Each original class is paired with every candidate class of the same
/// simple name. The artifact is a clone when every query class found in both
/// artifacts is cloned and at least `min_cloned_classes` classes are.
pub fn detect_artifact_clone(
    original: &SourceSet,
    candidate: &SourceSet,
    query_classes: &[String],
    config: &CloneConfig,
) -> ArtifactCloneReport {
    let mut by_name: HashMap<&str, Vec<&NormalizedUnit>> = HashMap::new();
    for unit in &candidate.units {
        by_name.entry(unit.primary_name()).or_default().push(unit);
    }

    let mut positives: Vec<(QualifiedClassName, Vec<QualifiedClassName>)> = Vec::new();
    for unit in &original.units {
        let Some(same_name) = by_name.get(unit.primary_name()) else {
            continue;
        };
        let mut matches: Vec<QualifiedClassName> = same_name
            .iter()
            .map(|c| compare_units(unit, c))
            .filter(|v| v.is_clone)
            .map(|v| v.candidate)
            .collect();
        if !matches.is_empty() {
            matches.sort();
            matches.dedup();
            positives.push((class_of(unit), matches));
        }
    }
    positives.sort();

    let majority = majority_rewrite(&positives);
    let mut relocation = RelocationMap::new();
    for (from, options) in &positives {
        let mut ranked: Vec<&QualifiedClassName> = options.iter().collect();
        ranked.sort_by_key(|to| {
            let consistent = majority.as_ref() == Some(&package_rewrite(&from.package, &to.package));
            (!consistent, to.package.clone())
        });
        for to in ranked {
            if relocation.insert(from.clone(), to.clone()).is_ok() {
                break;
            }
        }
    }

    let original_names: BTreeSet<&str> = original.units.iter().map(NormalizedUnit::primary_name).collect();
    let cloned_names: BTreeSet<&str> = relocation.iter().map(|(k, _)| k.simple_name.as_str()).collect();
    let matched_query_classes = query_classes
        .iter()
        .filter(|q| by_name.contains_key(q.as_str()))
        .count();
    let query_classes_cloned = query_classes
        .iter()
        .filter(|q| by_name.contains_key(q.as_str()) && original_names.contains(q.as_str()))
        .all(|q| cloned_names.contains(q.as_str()));
    let cloned_classes = relocation.len();
    let verdict = !original.units.is_empty()
        && !candidate.units.is_empty()
        && query_classes_cloned
        && cloned_classes >= config.min_cloned_classes;

    ArtifactCloneReport {
        original: original.gav.clone(),
        candidate: candidate.gav.clone(),
        matched_query_classes,
        cloned_classes,
        is_shaded: !relocation.is_identity(),
        relocation,
        verdict,
    }
}

/// Most frequent package rewrite among unambiguous pairings (all pairings if
/// none is unambiguous); ties go to the lexicographically smallest rewrite.
fn majority_rewrite(positives: &[(QualifiedClassName, Vec<QualifiedClassName>)]) -> Option<(String, String)> {
    let unambiguous: Vec<_> = positives.iter().filter(|(_, opts)| opts.len() == 1).collect();
    let pool: Vec<&(QualifiedClassName, Vec<QualifiedClassName>)> = if unambiguous.is_empty() {
        positives.iter().collect()
    } else {
        unambiguous
    };
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (from, opts) in pool {
        for to in opts {
            *counts.entry(package_rewrite(&from.package, &to.package)).or_default() += 1;
        }
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, n)| *n == best).map(|(k, _)| k)
}
