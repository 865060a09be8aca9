//! Build descriptor (pom) analysis.
//!
//! Only what the pipeline needs is extracted: coordinates, the parent
//! reference, declared dependencies and the shade plugin configuration.
//! Property placeholders (`${...}`) are kept verbatim; nothing is interpolated.

mod prevalence;

use std::collections::HashSet;
use std::fmt::Write as _;

use roxmltree::{Document, Node, ParsingOptions};
use serde::{Deserialize, Serialize};

use crate::registry::{Ga, Gav, Registry};

pub use prevalence::{prevalence_scan, scan_pom, PomScan, PrevalenceRecord};

pub const SHADE_PLUGIN: &str = "maven-shade-plugin";
pub const MAX_PARENT_DEPTH: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum PomError {
    #[error("malformed pom: {0}")]
    MalformedXml(String),
    #[error("malformed pom: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PomCoordinates {
    pub group: Option<String>,
    pub artifact: String,
    pub version: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DependencySection {
    Dependencies,
    DependencyManagement,
    Profile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyRef {
    pub group: String,
    pub artifact: String,
    pub version: Option<String>,
    pub scope: Option<String>,
    pub optional: bool,
    pub section: DependencySection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PomModel {
    pub coordinates: PomCoordinates,
    pub parent: Option<Gav>,
    pub declared_dependencies: Vec<DependencyRef>,
    pub shade_plugin_present: bool,
    /// `group:artifact[:...]` patterns named in shade plugin configuration.
    pub shade_artifact_refs: Vec<String>,
    pub relocations_present: bool,
}

impl PomModel {
    /// Coordinates, when group and version are known (directly or inherited).
    pub fn gav(&self) -> Option<Gav> {
        let c = &self.coordinates;
        Gav::new(c.group.clone()?, c.artifact.clone(), c.version.clone()?).ok()
    }

    /// Minimal pom carrying the extracted fields.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<project>\n");
        if let Some(parent) = &self.parent {
            let _ = writeln!(
                out,
                "  <parent>\n    <groupId>{}</groupId>\n    <artifactId>{}</artifactId>\n    <version>{}</version>\n  </parent>",
                escape(parent.group()),
                escape(parent.artifact()),
                escape(parent.version())
            );
        }
        if let Some(group) = &self.coordinates.group {
            let _ = writeln!(out, "  <groupId>{}</groupId>", escape(group));
        }
        let _ = writeln!(out, "  <artifactId>{}</artifactId>", escape(&self.coordinates.artifact));
        if let Some(version) = &self.coordinates.version {
            let _ = writeln!(out, "  <version>{}</version>", escape(version));
        }
        let write_deps = |out: &mut String, deps: &[&DependencyRef], indent: &str| {
            let _ = writeln!(out, "{indent}<dependencies>");
            for dep in deps {
                let _ = write!(
                    out,
                    "{indent}  <dependency><groupId>{}</groupId><artifactId>{}</artifactId>",
                    escape(&dep.group),
                    escape(&dep.artifact)
                );
                if let Some(v) = &dep.version {
                    let _ = write!(out, "<version>{}</version>", escape(v));
                }
                if let Some(s) = &dep.scope {
                    let _ = write!(out, "<scope>{}</scope>", escape(s));
                }
                if dep.optional {
                    out.push_str("<optional>true</optional>");
                }
                out.push_str("</dependency>\n");
            }
            let _ = writeln!(out, "{indent}</dependencies>");
        };
        let section = |s: DependencySection| -> Vec<&DependencyRef> {
            self.declared_dependencies.iter().filter(|d| d.section == s).collect()
        };
        let managed = section(DependencySection::DependencyManagement);
        if !managed.is_empty() {
            out.push_str("  <dependencyManagement>\n");
            write_deps(&mut out, &managed, "    ");
            out.push_str("  </dependencyManagement>\n");
        }
        let direct = section(DependencySection::Dependencies);
        if !direct.is_empty() {
            write_deps(&mut out, &direct, "  ");
        }
        let profile = section(DependencySection::Profile);
        if !profile.is_empty() {
            out.push_str("  <profiles><profile>\n");
            write_deps(&mut out, &profile, "    ");
            out.push_str("  </profile></profiles>\n");
        }
        out.push_str("</project>\n");
        out
    }
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub(crate) fn parse_document(bytes: &[u8]) -> Result<Document<'_>, PomError> {
    let text = std::str::from_utf8(bytes).map_err(|e| PomError::MalformedXml(e.to_string()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    Document::parse_with_options(
        text,
        ParsingOptions {
            allow_dtd: true,
            ..ParsingOptions::default()
        },
    )
    .map_err(|e| PomError::MalformedXml(e.to_string()))
}

fn element<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn elements<'a, 'i: 'a>(node: Node<'a, 'i>, name: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children().filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn text_of(node: Node<'_, '_>, name: &str) -> Option<String> {
    let value: String = element(node, name)?
        .children()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect();
    let value = value.trim();
    (!value.is_empty()).then(|| value.to_string())
}

fn dependencies_under(parent: Node<'_, '_>, section: DependencySection, out: &mut Vec<DependencyRef>) {
    let Some(deps) = element(parent, "dependencies") else {
        return;
    };
    for dep in elements(deps, "dependency") {
        let (Some(group), Some(artifact)) = (text_of(dep, "groupId"), text_of(dep, "artifactId")) else {
            log::debug!("ignoring dependency without group or artifact id");
            continue;
        };
        out.push(DependencyRef {
            group,
            artifact,
            version: text_of(dep, "version"),
            scope: text_of(dep, "scope"),
            optional: text_of(dep, "optional").is_some_and(|o| o == "true"),
            section,
        });
    }
}

pub fn parse_pom(bytes: &[u8]) -> Result<PomModel, PomError> {
    let doc = parse_document(bytes)?;
    let project = doc.root_element();
    if project.tag_name().name() != "project" {
        return Err(PomError::Structure(format!(
            "root element is <{}>, expected <project>",
            project.tag_name().name()
        )));
    }
    let artifact = text_of(project, "artifactId").ok_or_else(|| PomError::Structure("missing artifactId".into()))?;

    let parent_node = element(project, "parent");
    let parent = match parent_node {
        Some(p) => {
            let (g, a, v) = (text_of(p, "groupId"), text_of(p, "artifactId"), text_of(p, "version"));
            match (g, a, v) {
                (Some(g), Some(a), Some(v)) => Some(Gav::new(g, a, v).map_err(|e| PomError::Structure(format!("parent: {e}")))?),
                _ => return Err(PomError::Structure("incomplete parent coordinates".into())),
            }
        }
        None => None,
    };
    let coordinates = PomCoordinates {
        group: text_of(project, "groupId").or_else(|| parent.as_ref().map(|p| p.group().to_string())),
        artifact,
        version: text_of(project, "version").or_else(|| parent.as_ref().map(|p| p.version().to_string())),
    };

    let mut declared_dependencies = Vec::new();
    dependencies_under(project, DependencySection::Dependencies, &mut declared_dependencies);
    if let Some(dm) = element(project, "dependencyManagement") {
        dependencies_under(dm, DependencySection::DependencyManagement, &mut declared_dependencies);
    }
    if let Some(profiles) = element(project, "profiles") {
        for profile in elements(profiles, "profile") {
            dependencies_under(profile, DependencySection::Profile, &mut declared_dependencies);
            if let Some(dm) = element(profile, "dependencyManagement") {
                dependencies_under(dm, DependencySection::Profile, &mut declared_dependencies);
            }
        }
    }

    let mut shade_plugin_present = false;
    let mut relocations_present = false;
    let mut shade_artifact_refs = Vec::new();
    let shade_plugins = project
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "plugin")
        .filter(|n| text_of(*n, "artifactId").as_deref() == Some(SHADE_PLUGIN));
    for plugin in shade_plugins {
        shade_plugin_present = true;
        for node in plugin.descendants().filter(Node::is_element) {
            let name = node.tag_name().name();
            if name == "relocations" {
                relocations_present = true;
            }
            let in_artifact_set = matches!(name, "include" | "exclude")
                && node.ancestors().any(|a| a.tag_name().name() == "artifactSet");
            let filter_artifact = name == "artifact" && node.parent().is_some_and(|p| p.tag_name().name() == "filter");
            if in_artifact_set || filter_artifact {
                if let Some(text) = node.text().map(str::trim).filter(|t| !t.is_empty()) {
                    shade_artifact_refs.push(text.to_string());
                }
            }
        }
    }

    Ok(PomModel {
        coordinates,
        parent,
        declared_dependencies,
        shade_plugin_present,
        shade_artifact_refs,
        relocations_present,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchedPattern {
    DependencySection,
    ShadePluginSection,
    SameGa,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyVerdict {
    pub candidate: Gav,
    pub refers_to_original: bool,
    pub matched_pattern: MatchedPattern,
    pub via_parent: bool,
}

fn has_placeholder(s: &str) -> bool {
    s.contains("${")
}

fn dependency_matches(dep: &DependencyRef, original: &Ga) -> bool {
    if has_placeholder(&dep.group) || has_placeholder(&dep.artifact) {
        log::debug!("unresolved dependency {}:{} treated as non-matching", dep.group, dep.artifact);
        return false;
    }
    original.matches(&dep.group, &dep.artifact)
}

/// Whether a shade `artifactSet`/`filter` pattern names the original.
///
/// The group must be spelled out; the artifact may be omitted or use `*` globs.
fn shade_pattern_matches(pattern: &str, original: &Ga) -> bool {
    if has_placeholder(pattern) {
        return false;
    }
    let mut parts = pattern.split(':');
    let group = parts.next().unwrap_or_default();
    if group != original.group() {
        return false;
    }
    match parts.next() {
        None | Some("") => true,
        Some(artifact) => glob_match(artifact, original.artifact()),
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let Some((head, rest)) = pattern.split_once('*') else {
        return pattern == text;
    };
    let Some(mut remaining) = text.strip_prefix(head) else {
        return false;
    };
    let pieces: Vec<&str> = rest.split('*').collect();
    for (i, piece) in pieces.iter().enumerate() {
        if i + 1 == pieces.len() {
            return remaining.ends_with(piece);
        }
        match remaining.find(piece) {
            Some(pos) => remaining = &remaining[pos + piece.len()..],
            None => return false,
        }
    }
    true
}

fn pom_refers(pom: &PomModel, original: &Ga) -> Option<MatchedPattern> {
    if pom.declared_dependencies.iter().any(|d| dependency_matches(d, original)) {
        return Some(MatchedPattern::DependencySection);
    }
    if pom.shade_artifact_refs.iter().any(|p| shade_pattern_matches(p, original)) {
        return Some(MatchedPattern::ShadePluginSection);
    }
    None
}

/// Decides whether a candidate openly refers to the original artifact.
///
/// `chain` runs from the candidate's own pom (index 0) up to its root parent.
/// Dependency and shade-plugin references count anywhere in the chain; the
/// same group/artifact rule applies to the candidate itself.
pub fn references_original(candidate: &Gav, chain: &[PomModel], original: &Ga) -> DependencyVerdict {
    let verdict = |pattern: MatchedPattern, via_parent: bool| DependencyVerdict {
        candidate: candidate.clone(),
        refers_to_original: pattern != MatchedPattern::None,
        matched_pattern: pattern,
        via_parent,
    };
    if let Some(own) = chain.first() {
        if let Some(pattern) = pom_refers(own, original) {
            return verdict(pattern, false);
        }
    }
    if candidate.ga() == *original {
        return verdict(MatchedPattern::SameGa, false);
    }
    for parent in chain.iter().skip(1) {
        if let Some(pattern) = pom_refers(parent, original) {
            return verdict(pattern, true);
        }
    }
    verdict(MatchedPattern::None, false)
}

/// Follows parent references through the registry.
///
/// The chain stops at the first parent that cannot be fetched or parsed,
/// at a cycle, or after `max_depth` parents.
pub fn resolve_parent_chain(registry: &Registry, pom: PomModel, max_depth: usize) -> Vec<PomModel> {
    let mut seen = HashSet::new();
    if let Some(gav) = pom.gav() {
        seen.insert(gav);
    }
    let mut next = pom.parent.clone();
    let mut chain = vec![pom];
    while let Some(parent) = next.take() {
        if chain.len() > max_depth || !seen.insert(parent.clone()) {
            log::debug!("parent chain cut at {parent}");
            break;
        }
        let parsed = registry
            .fetch_pom(&parent)
            .map_err(|e| e.to_string())
            .and_then(|blob| parse_pom(&blob.bytes).map_err(|e| e.to_string()));
        match parsed {
            Ok(model) => {
                next = model.parent.clone();
                chain.push(model);
            }
            Err(err) => log::debug!("parent {parent} unavailable: {err}"),
        }
    }
    chain
}
