//! Class-name fingerprints.
//!
//! Unqualified class names survive package relocation, so they are what the
//! registry is queried with. Names made of many camel-case tokens are more
//! likely to be unique to one library than short ones like `Utils`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Cursor;

use serde::{Deserialize, Serialize};

use crate::registry::{BlobKind, RegistryBlob};

pub const DEFAULT_QUERY_CLASSES: usize = 10;

/// Prefixes under which archives nest regular class trees.
const NESTED_ROOTS: &[&str] = &["BOOT-INF/classes/", "WEB-INF/classes/"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualifiedClassName {
    pub package: String,
    pub simple_name: String,
}

impl QualifiedClassName {
    pub fn new(package: impl Into<String>, simple_name: impl Into<String>) -> Self {
        Self {
            package: package.into(),
            simple_name: simple_name.into(),
        }
    }

    /// Splits `a.b.Foo` at the last dot.
    pub fn parse(qualified: &str) -> Self {
        match qualified.rsplit_once('.') {
            Some((package, simple)) => Self::new(package, simple),
            None => Self::new("", qualified),
        }
    }

    /// Derives the top-level class from an archive member path, folding
    /// nested and anonymous classes into their outer class.
    ///
    /// Returns `None` for members that do not carry `extension`, for
    /// `package-info` / `module-info`, and for names that are not identifiers.
    pub fn from_member_path(path: &str, extension: &str) -> Option<Self> {
        let mut path = path.strip_suffix(extension)?;
        if let Some(rest) = path.strip_prefix("META-INF/versions/") {
            path = rest.split_once('/')?.1;
        }
        for root in NESTED_ROOTS {
            if let Some(rest) = path.strip_prefix(root) {
                path = rest;
            }
        }
        let (dir, stem) = path.rsplit_once('/').unwrap_or(("", path));
        let outer = stem.split('$').next().unwrap_or_default();
        if outer.is_empty() || outer == "package-info" || outer == "module-info" || !is_identifier(outer) {
            return None;
        }
        if !dir.is_empty() && !dir.split('/').all(is_identifier) {
            return None;
        }
        Some(Self::new(dir.replace('/', "."), outer))
    }
}

impl fmt::Display for QualifiedClassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.package.is_empty() {
            f.write_str(&self.simple_name)
        } else {
            write!(f, "{}.{}", self.package, self.simple_name)
        }
    }
}

impl Serialize for QualifiedClassName {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QualifiedClassName {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Self::parse(&String::deserialize(deserializer)?))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

#[derive(Debug, thiserror::Error)]
pub enum FingerprintError {
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("expected a binary or sources archive, got {0}")]
    NotAnArchive(BlobKind),
}

/// Top-level classes of a binary (`.class` members) or sources (`.java`
/// members) archive.
pub fn list_class_names(archive: &RegistryBlob) -> Result<BTreeSet<QualifiedClassName>, FingerprintError> {
    let extension = match archive.kind {
        BlobKind::BinaryArchive => ".class",
        BlobKind::SourcesArchive => ".java",
        other => return Err(FingerprintError::NotAnArchive(other)),
    };
    list_archive_classes(&archive.bytes, extension)
}

pub(crate) fn list_archive_classes(bytes: &[u8], extension: &str) -> Result<BTreeSet<QualifiedClassName>, FingerprintError> {
    let archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| FingerprintError::CorruptArchive(e.to_string()))?;
    Ok(archive
        .file_names()
        .filter_map(|name| QualifiedClassName::from_member_path(name, extension))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Upper,
    Lower,
    Digit,
    Separator,
}

fn classify(c: char) -> CharClass {
    if c.is_uppercase() {
        CharClass::Upper
    } else if c.is_alphabetic() {
        CharClass::Lower
    } else if c.is_numeric() {
        CharClass::Digit
    } else {
        CharClass::Separator
    }
}

/// Number of camel-case tokens in `name`.
///
/// Acronym runs count once (`JSONDriver` is `JSON|Driver`), digit runs form
/// their own token, and underscores or other non-alphanumerics only separate.
pub fn camel_token_count(name: &str) -> usize {
    // Collapse into runs of equal character class, then count tokens per run.
    let mut runs: Vec<(CharClass, usize)> = Vec::new();
    for c in name.chars() {
        let class = classify(c);
        match runs.last_mut() {
            Some((last, len)) if *last == class => *len += 1,
            _ => runs.push((class, 1)),
        }
    }
    let mut count = 0;
    for (i, &(class, len)) in runs.iter().enumerate() {
        let next = runs.get(i + 1).map(|r| r.0);
        let prev = i.checked_sub(1).map(|p| runs[p].0);
        count += match class {
            CharClass::Separator => 0,
            CharClass::Digit => 1,
            // the last capital starts the following lowercase word
            CharClass::Upper if next == Some(CharClass::Lower) => usize::from(len > 1),
            CharClass::Upper => 1,
            CharClass::Lower if prev == Some(CharClass::Upper) => 1,
            CharClass::Lower => 1,
        };
    }
    count
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassNameScore {
    pub name: String,
    pub token_count: usize,
}

impl ClassNameScore {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let token_count = camel_token_count(&name);
        Self { name, token_count }
    }
}

/// Every distinct simple name, best candidates first: more tokens, then
/// longer names, then lexicographic.
pub fn rank_class_names<'a>(names: impl IntoIterator<Item = &'a QualifiedClassName>) -> Vec<ClassNameScore> {
    let distinct: BTreeSet<&str> = names.into_iter().map(|n| n.simple_name.as_str()).collect();
    let mut scored: Vec<ClassNameScore> = distinct.into_iter().map(ClassNameScore::new).collect();
    scored.sort_by(|a, b| {
        b.token_count
            .cmp(&a.token_count)
            .then_with(|| b.name.chars().count().cmp(&a.name.chars().count()))
            .then_with(|| a.name.cmp(&b.name))
    });
    scored
}

/// The `k` simple names to query the registry with.
pub fn select_query_classes<'a>(names: impl IntoIterator<Item = &'a QualifiedClassName>, k: usize) -> Vec<String> {
    rank_class_names(names).into_iter().take(k).map(|s| s.name).collect()
}
