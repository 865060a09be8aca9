use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use roxmltree::Node;
use walkdir::WalkDir;

use super::project::PovProject;
use super::PovError;
use crate::clone::lexer::{lex, RawKind, RawToken};
use crate::clone::{qualifier_len, RelocationMap};
use crate::fingerprint::QualifiedClassName;
use crate::pom::{escape, parse_document};
use crate::registry::{Ga, Gav};

/// Directories never copied into an instance workspace.
const SKIPPED_DIRS: &[&str] = &["target", ".git"];

/// A POV project materialized against one candidate artifact.
#[derive(Debug, Clone)]
pub struct PovInstance {
    pub source_pov: PovProject,
    pub target: Gav,
    /// Import statements changed by relocation.
    pub rewritten_imports: usize,
    /// Fully qualified references outside imports changed by relocation.
    pub rewritten_references: usize,
    pub workspace: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewriteSummary {
    pub pom_changed: bool,
    pub rewritten_imports: usize,
    pub rewritten_references: usize,
    pub files_changed: usize,
}

/// Copies the POV into `workspace` (which must be absent or empty) and
/// retargets the copy at `candidate`.
pub fn instantiate(
    pov: &PovProject,
    candidate: &Gav,
    relocation: &RelocationMap,
    workspace: &Path,
) -> Result<PovInstance, PovError> {
    if workspace.exists() && fs::read_dir(workspace)?.next().is_some() {
        return Err(PovError::InvalidProject {
            root: workspace.to_path_buf(),
            message: "instance workspace is not empty".into(),
        });
    }
    copy_project(&pov.root_dir, workspace)?;
    let summary = retarget(workspace, &pov.original, candidate, relocation)?;
    Ok(PovInstance {
        source_pov: pov.clone(),
        target: candidate.clone(),
        rewritten_imports: summary.rewritten_imports,
        rewritten_references: summary.rewritten_references,
        workspace: workspace.to_path_buf(),
    })
}

fn copy_project(from: &Path, to: &Path) -> Result<(), PovError> {
    let walker = WalkDir::new(from).sort_by_file_name().into_iter().filter_entry(|e| {
        e.depth() != 1 || !SKIPPED_DIRS.iter().any(|d| e.file_name() == *d)
    });
    for entry in walker {
        let entry = entry.map_err(|e| PovError::Io(e.into()))?;
        let relative = entry.path().strip_prefix(from).expect("walk stays under its root");
        let dest = to.join(relative);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest)?;
        } else if entry.file_type().is_file() {
            fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

/// Rewrites a materialized workspace in place: the pom dependency on
/// `original` becomes a dependency on `candidate`, and Java references to
/// relocated classes move to their new packages. Applying it twice is a no-op.
pub fn retarget(
    workspace: &Path,
    original: &Gav,
    candidate: &Gav,
    relocation: &RelocationMap,
) -> Result<RewriteSummary, PovError> {
    let mut summary = RewriteSummary::default();
    let pom_path = workspace.join("pom.xml");
    let pom = fs::read_to_string(&pom_path)?;
    let spliced = splice_dependency(&pom, &original.ga(), candidate).map_err(|message| PovError::InvalidProject {
        root: workspace.to_path_buf(),
        message,
    })?;
    if spliced != pom {
        fs::write(&pom_path, spliced)?;
        summary.pom_changed = true;
        summary.files_changed += 1;
    }

    let rewriter = Rewriter::new(relocation);
    let java_files = WalkDir::new(workspace)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() != 1 || !SKIPPED_DIRS.iter().any(|d| e.file_name() == *d))
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "java"));
    for entry in java_files {
        let source = fs::read_to_string(entry.path())?;
        let relative = entry.path().strip_prefix(workspace).unwrap_or(entry.path());
        if let Some(rewrite) = rewriter.rewrite(&source, relative)? {
            fs::write(entry.path(), &rewrite.text)?;
            summary.rewritten_imports += rewrite.imports;
            summary.rewritten_references += rewrite.references;
            summary.files_changed += 1;
        }
    }
    Ok(summary)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

fn trimmed_text(node: Node<'_, '_>) -> String {
    node.children().filter_map(|c| c.text()).collect::<String>().trim().to_string()
}

/// Range of the trimmed text content of a leaf element; `None` when empty.
fn value_range(source: &str, element: Node<'_, '_>) -> Option<Range<usize>> {
    if let Some(text) = element.first_child().filter(|c| c.is_text()) {
        let range = text.range();
        let raw = &source[range.clone()];
        let start = range.start + (raw.len() - raw.trim_start().len());
        let end = range.end - (raw.len() - raw.trim_end().len());
        return Some(start..end.max(start));
    }
    None
}

/// Points every direct `project/dependencies/dependency` on `original` at
/// `candidate`, editing only the coordinate values.
fn splice_dependency(pom: &str, original: &Ga, candidate: &Gav) -> Result<String, String> {
    let bom = if pom.starts_with('\u{feff}') { '\u{feff}'.len_utf8() } else { 0 };
    let body = &pom[bom..];
    let doc = parse_document(body.as_bytes()).map_err(|e| format!("pom.xml: {e}"))?;
    let deps: Vec<Node<'_, '_>> = child(doc.root_element(), "dependencies")
        .map(|d| {
            d.children()
                .filter(|c| c.is_element() && c.tag_name().name() == "dependency")
                .collect()
        })
        .unwrap_or_default();

    let coordinate = |dep: Node<'_, '_>, name: &str| child(dep, name).map(trimmed_text);
    let mut edits: Vec<(Range<usize>, String)> = Vec::new();
    let mut found = false;
    for dep in &deps {
        let (Some(group), Some(artifact)) = (coordinate(*dep, "groupId"), coordinate(*dep, "artifactId")) else {
            continue;
        };
        if !original.matches(&group, &artifact) {
            continue;
        }
        found = true;
        for (name, value) in [("groupId", candidate.group()), ("artifactId", candidate.artifact())] {
            let element = child(*dep, name).expect("coordinate checked above");
            if trimmed_text(element) != value {
                let range = value_range(body, element).ok_or("empty coordinate element")?;
                edits.push((range, escape(value)));
            }
        }
        match child(*dep, "version") {
            Some(version) if trimmed_text(version) == candidate.version() => {}
            Some(version) => match value_range(body, version) {
                Some(range) => edits.push((range, escape(candidate.version()))),
                None => edits.push((version.range(), format!("<version>{}</version>", escape(candidate.version())))),
            },
            None => {
                let after = child(*dep, "artifactId").expect("coordinate checked above").range().end;
                edits.push((after..after, format!("<version>{}</version>", escape(candidate.version()))));
            }
        }
    }
    if !found {
        let already = deps.iter().any(|dep| {
            coordinate(*dep, "groupId").as_deref() == Some(candidate.group())
                && coordinate(*dep, "artifactId").as_deref() == Some(candidate.artifact())
                && coordinate(*dep, "version").as_deref() == Some(candidate.version())
        });
        if !already {
            return Err(format!("no dependency on {original} or {candidate}"));
        }
    }
    let mut out = body.to_string();
    edits.sort_by_key(|(range, _)| std::cmp::Reverse(range.start));
    for (range, value) in edits {
        out.replace_range(range, &value);
    }
    Ok(format!("{}{out}", &pom[..bom]))
}

#[derive(Debug)]
struct SourceRewrite {
    text: String,
    imports: usize,
    references: usize,
}

struct Rewriter<'m> {
    relocation: &'m RelocationMap,
    /// Packages of the original artifact, with the packages they moved to.
    packages: BTreeMap<&'m str, BTreeSet<&'m str>>,
    enforce: bool,
}

impl<'m> Rewriter<'m> {
    fn new(relocation: &'m RelocationMap) -> Self {
        Self {
            relocation,
            packages: relocation.package_moves(),
            enforce: !relocation.is_identity(),
        }
    }

    /// New package for `package.class`, `None` when it stays put.
    fn target(&self, package: &str, class: &str, file: &Path) -> Result<Option<&'m str>, PovError> {
        let key = QualifiedClassName::new(package, class);
        match self.relocation.get(&key) {
            Some(to) if to.package != package => Ok(Some(to.package.as_str())),
            Some(_) => Ok(None),
            None if self.enforce && self.packages.contains_key(package) => Err(PovError::UnmappedReference {
                file: file.to_path_buf(),
                reference: key.to_string(),
            }),
            None => Ok(None),
        }
    }

    fn rewrite(&self, source: &str, file: &Path) -> Result<Option<SourceRewrite>, PovError> {
        if self.relocation.is_empty() {
            return Ok(None);
        }
        let tokens = match lex(source) {
            Ok(tokens) => tokens,
            Err(err) => {
                log::warn!("{}: not rewritten: {err}", file.display());
                return Ok(None);
            }
        };
        let mut edits: Vec<(Range<usize>, String)> = Vec::new();
        let (mut imports, mut references) = (0, 0);
        let mut i = 0;
        while i < tokens.len() {
            let tok = &tokens[i];
            if tok.is_keyword("import") {
                let end = (i..tokens.len()).find(|&j| tokens[j].is_punct(";")).unwrap_or(tokens.len());
                let before = edits.len();
                self.rewrite_import(source, &tokens, i, end, file, &mut edits)?;
                imports += usize::from(edits.len() > before);
                i = end + 1;
                continue;
            }
            if tok.is_keyword("package") {
                i = (i..tokens.len()).find(|&j| tokens[j].is_punct(";")).unwrap_or(tokens.len()) + 1;
                continue;
            }
            if tok.kind == RawKind::Identifier {
                let q = qualifier_len(&tokens, i);
                if q > 0 {
                    if let Some(edit) = self.qualified(&tokens, i, q, file)? {
                        edits.push(edit);
                        references += 1;
                    }
                    i += q + 1;
                    continue;
                }
            }
            i += 1;
        }
        if edits.is_empty() {
            return Ok(None);
        }
        let mut text = source.to_string();
        edits.sort_by_key(|(range, _)| std::cmp::Reverse(range.start));
        for (range, value) in edits {
            text.replace_range(range, &value);
        }
        Ok(Some(SourceRewrite {
            text,
            imports,
            references,
        }))
    }

    /// Edit for the qualified name whose `q`-token qualifier starts at `at`.
    fn qualified(
        &self,
        tokens: &[RawToken<'_>],
        at: usize,
        q: usize,
        file: &Path,
    ) -> Result<Option<(Range<usize>, String)>, PovError> {
        let package: Vec<&str> = tokens[at..at + q].iter().step_by(2).map(|t| t.text).collect();
        let package = package.join(".");
        let class = tokens[at + q].text;
        Ok(self.target(&package, class, file)?.map(|to| {
            let range = tokens[at].start..tokens[at + q].start;
            let replacement = if to.is_empty() { String::new() } else { format!("{to}.") };
            (range, replacement)
        }))
    }

    fn rewrite_import(
        &self,
        source: &str,
        tokens: &[RawToken<'_>],
        import: usize,
        end: usize,
        file: &Path,
        edits: &mut Vec<(Range<usize>, String)>,
    ) -> Result<(), PovError> {
        let mut start = import + 1;
        if tokens.get(start).is_some_and(|t| t.is_keyword("static")) {
            start += 1;
        }
        if start >= end {
            return Ok(());
        }
        let q = qualifier_len(tokens, start);
        if q > 0 {
            if let Some(edit) = self.qualified(tokens, start, q, file)? {
                edits.push(edit);
            }
            return Ok(());
        }
        // package wildcard: a.b.c.*
        let chain = &tokens[start..end];
        let is_wildcard = chain.len() >= 3
            && chain.last().is_some_and(|t| t.is_punct("*"))
            && chain[..chain.len() - 1]
                .chunks(2)
                .all(|pair| pair[0].kind == RawKind::Identifier && pair.get(1).is_some_and(|d| d.is_punct(".")));
        if !is_wildcard {
            return Ok(());
        }
        let package: Vec<&str> = chain[..chain.len() - 1].iter().step_by(2).map(|t| t.text).collect();
        let package = package.join(".");
        let Some(targets) = self.packages.get(package.as_str()) else {
            return Ok(());
        };
        let moved: Vec<&str> = targets.iter().copied().filter(|t| *t != package).collect();
        if moved.is_empty() {
            return Ok(());
        }
        let statement = tokens[import].start..tokens.get(end).map_or(source.len(), RawToken::end);
        let text = targets
            .iter()
            .map(|t| if t.is_empty() { String::new() } else { format!("import {t}.*;") })
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ");
        edits.push((statement, text));
        Ok(())
    }
}
