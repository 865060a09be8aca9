//! A small synthetic Java library and the source transformations used to
//! plant clones of it.
//!
//! Authoring rules the transformations rely on: string literals contain no
//! comment openers or braces, comments contain no `;`, `{` or `}`, every class
//! has a string literal, a `return` line and a line ending in `) {`.

use std::collections::{BTreeMap, BTreeSet};

use shadescan_core::fingerprint::QualifiedClassName;
use shadescan_core::registry::Gav;

pub const ORIGINAL_PREFIX: &str = "org.vuln.yamlish";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
}

impl SourceFile {
    pub fn class(&self) -> QualifiedClassName {
        let stem = self.path.trim_end_matches(".java");
        QualifiedClassName::parse(&stem.replace('/', "."))
    }
}

const DOCUMENT_COMPOSER_FACTORY: &str = r#"/*
 * Yamlish: a small YAML reader.
 * Copyright the Yamlish authors.
 */
package org.vuln.yamlish;

import java.util.ArrayList;
import java.util.List;
import org.vuln.yamlish.nodes.MappingNodeBuilder;
import org.vuln.yamlish.nodes.ScalarNodeReader;

/**
 * Builds documents from parsed events.
 */
public class DocumentComposerFactory {
    private static final int DEFAULT_DEPTH = 64;
    private final List<String> events = new ArrayList<>();

    public DocumentComposerFactory() {
        events.add("stream-start");
    }

    // compose one document from the recorded events
    public Object compose(String input) {
        ScalarNodeReader reader = new ScalarNodeReader(input);
        MappingNodeBuilder builder = new MappingNodeBuilder(DEFAULT_DEPTH);
        while (reader.hasNext()) {
            builder.put(reader.next(), new org.vuln.yamlish.RecursiveAliasResolver(builder));
        }
        return builder.build();
    }

    public int depth() {
        return DEFAULT_DEPTH;
    }
}
"#;

const RECURSIVE_ALIAS_RESOLVER: &str = r#"/*
 * Yamlish: a small YAML reader.
 */
package org.vuln.yamlish;

import org.vuln.yamlish.nodes.MappingNodeBuilder;

/**
 * Resolves anchors and aliases.
 * Aliases are expanded without a depth limit.
 */
public class RecursiveAliasResolver {
    private final MappingNodeBuilder owner;

    public RecursiveAliasResolver(MappingNodeBuilder owner) {
        this.owner = owner;
    }

    public Object resolve(Object node, int level) {
        // no guard against self-referencing anchors
        if (node instanceof RecursiveAliasResolver) {
            return ((RecursiveAliasResolver) node).resolve(this, level + 1);
        }
        return node == null ? "null" : node;
    }

    public int limit() {
        return owner.depth() * 2;
    }
}
"#;

const MAPPING_NODE_BUILDER: &str = r#"package org.vuln.yamlish.nodes;

import java.util.LinkedHashMap;
import java.util.Map;
import org.vuln.yamlish.util.Utils;

public class MappingNodeBuilder {
    private final Map<String, Object> entries = new LinkedHashMap<>();
    private final int maxDepth;

    public MappingNodeBuilder(int maxDepth) {
        this.maxDepth = maxDepth;
    }

    public void put(String key, Object value) {
        if (entries.size() > maxDepth * 1024) {
            throw new IllegalStateException("too many entries: " + Utils.describe(key));
        }
        entries.put(key, value);
    }

    public int depth() {
        return maxDepth;
    }

    public Map<String, Object> build() {
        return java.util.Collections.unmodifiableMap(entries);
    }
}
"#;

const SCALAR_NODE_READER: &str = r#"package org.vuln.yamlish.nodes;

import java.util.Iterator;

/** Splits plain scalars out of a flow. */
public class ScalarNodeReader implements Iterator<String> {
    private final String[] parts;
    private int position = 0;

    public ScalarNodeReader(String input) {
        this.parts = input.split(",");
    }

    @Override
    public boolean hasNext() {
        return position < parts.length;
    }

    @Override
    public String next() {
        String part = parts[position].trim();
        position++;
        return part.isEmpty() ? "~" : part;
    }
}
"#;

const YAML: &str = r#"package org.vuln.yamlish;

/**
 * Entry point.
 */
public class Yaml {
    private final DocumentComposerFactory factory = new DocumentComposerFactory();

    public Object load(String document) {
        if (document == null) {
            throw new IllegalArgumentException("document must not be null");
        }
        return factory.compose(document);
    }

    public String version() {
        return "1.31";
    }
}
"#;

const UTILS: &str = r#"package org.vuln.yamlish.util;

public final class Utils {
    private Utils() {
    }

    public static String describe(Object value) {
        String text = String.valueOf(value);
        return text.length() > 40 ? text.substring(0, 40) + "..." : text;
    }
}
"#;

/// Class names of the library, most characteristic first.
pub const CLASSES: [&str; 6] = [
    "DocumentComposerFactory",
    "RecursiveAliasResolver",
    "MappingNodeBuilder",
    "ScalarNodeReader",
    "Yaml",
    "Utils",
];

/// The original library's sources.
pub fn library() -> Vec<SourceFile> {
    [
        ("org/vuln/yamlish/DocumentComposerFactory.java", DOCUMENT_COMPOSER_FACTORY),
        ("org/vuln/yamlish/RecursiveAliasResolver.java", RECURSIVE_ALIAS_RESOLVER),
        ("org/vuln/yamlish/nodes/MappingNodeBuilder.java", MAPPING_NODE_BUILDER),
        ("org/vuln/yamlish/nodes/ScalarNodeReader.java", SCALAR_NODE_READER),
        ("org/vuln/yamlish/Yaml.java", YAML),
        ("org/vuln/yamlish/util/Utils.java", UTILS),
    ]
    .into_iter()
    .map(|(path, text)| SourceFile {
        path: path.to_string(),
        text: text.to_string(),
    })
    .collect()
}

/// Binary archive member names matching [`library`], with some nested classes.
pub fn library_class_members() -> Vec<String> {
    let mut members: Vec<String> = library()
        .iter()
        .map(|f| f.path.replace(".java", ".class"))
        .collect();
    members.push("org/vuln/yamlish/nodes/ScalarNodeReader$1.class".into());
    members.push("org/vuln/yamlish/Yaml$Loader.class".into());
    members.push("META-INF/MANIFEST.MF".into());
    members
}

pub fn file_named<'a>(files: &'a [SourceFile], simple_name: &str) -> &'a SourceFile {
    files
        .iter()
        .find(|f| f.class().simple_name == simple_name)
        .unwrap_or_else(|| panic!("no {simple_name}"))
}

/// Moves every file under `from` to `to`, rewriting all textual references.
pub fn relocate(files: &[SourceFile], from: &str, to: &str) -> Vec<SourceFile> {
    let (from_path, to_path) = (from.replace('.', "/"), to.replace('.', "/"));
    files
        .iter()
        .map(|f| SourceFile {
            path: f.path.replacen(&from_path, &to_path, 1),
            text: f.text.replace(from, to),
        })
        .collect()
}

pub fn comment_edit(file: &SourceFile) -> SourceFile {
    let mut text = String::from("/* Vendored copy. Local changes are marked. */\n");
    for line in file.text.lines() {
        match line.find("// ") {
            Some(pos) => text.push_str(&format!("{}// edited: {}", &line[..pos], &line[pos + 3..])),
            None if line.trim_start().starts_with("* ") => text.push_str(&format!("{line} (vendored)")),
            None => text.push_str(line),
        }
        text.push('\n');
    }
    text.push_str("// end of vendored file\n");
    SourceFile {
        path: file.path.clone(),
        text,
    }
}

fn is_comment_line(trimmed: &str) -> bool {
    trimmed.starts_with("//") || trimmed.starts_with("/*") || trimmed.starts_with('*')
}

pub fn whitespace_reformat(file: &SourceFile) -> SourceFile {
    let mut text = String::new();
    for line in file.text.lines() {
        let trimmed = line.trim_start();
        let depth = (line.len() - trimmed.len()) / 4;
        let body = if is_comment_line(trimmed) || trimmed.contains('"') {
            trimmed.to_string()
        } else {
            trimmed.replace(" = ", "=").replace('(', "( ").replace(')', " )").replace(" {", "\n{")
        };
        text.push_str(&"\t".repeat(depth));
        text.push_str(&body);
        text.push_str("\r\n");
    }
    SourceFile {
        path: file.path.clone(),
        text,
    }
}

pub fn statement_insert(file: &SourceFile) -> SourceFile {
    let mut lines: Vec<String> = file.text.lines().map(str::to_string).collect();
    let at = lines
        .iter()
        .position(|l| l.trim_end().ends_with(") {"))
        .expect("every class has a body line");
    lines.insert(at + 1, "        this.hashCode();".into());
    SourceFile {
        path: file.path.clone(),
        text: lines.join("\n") + "\n",
    }
}

pub fn statement_delete(file: &SourceFile) -> SourceFile {
    let mut lines: Vec<String> = file.text.lines().map(str::to_string).collect();
    let at = lines
        .iter()
        .position(|l| l.trim_start().starts_with("return "))
        .expect("every class returns something");
    lines.remove(at);
    SourceFile {
        path: file.path.clone(),
        text: lines.join("\n") + "\n",
    }
}

pub fn literal_change(file: &SourceFile) -> SourceFile {
    let mut lines: Vec<String> = file.text.lines().map(str::to_string).collect();
    let at = lines
        .iter()
        .position(|l| !is_comment_line(l.trim_start()) && l.contains('"'))
        .expect("every class has a string literal");
    lines[at] = lines[at].replacen('"', "\"x-", 1);
    SourceFile {
        path: file.path.clone(),
        text: lines.join("\n") + "\n",
    }
}

/// Unrelated classes that happen to share the library's simple names.
pub fn decoy(simple_names: &[&str], package: &str) -> Vec<SourceFile> {
    simple_names
        .iter()
        .map(|name| SourceFile {
            path: format!("{}/{name}.java", package.replace('.', "/")),
            text: format!(
                "package {package};\n\npublic class {name} {{\n    private final String label = \"{name}\";\n\n    public String label() {{\n        return label;\n    }}\n}}\n"
            ),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Planted {
    VerbatimCopy,
    PackageRelocation,
    CommentEdit,
    WhitespaceReformat,
    StatementInsert,
    StatementDelete,
    LiteralChange,
    Decoy,
}

impl Planted {
    pub const ALL: [Planted; 8] = [
        Planted::VerbatimCopy,
        Planted::PackageRelocation,
        Planted::CommentEdit,
        Planted::WhitespaceReformat,
        Planted::StatementInsert,
        Planted::StatementDelete,
        Planted::LiteralChange,
        Planted::Decoy,
    ];

    /// Transformations a type-2 detector must see through.
    pub fn preserves_clone(self) -> bool {
        matches!(
            self,
            Planted::VerbatimCopy | Planted::PackageRelocation | Planted::CommentEdit | Planted::WhitespaceReformat
        )
    }
}

/// One candidate of the ground-truth corpus and what a correct detector
/// must report for it.
#[derive(Debug, Clone)]
pub struct PlantedCandidate {
    pub gav: Gav,
    pub kind: Planted,
    pub files: Vec<SourceFile>,
    /// The class a breaking transformation was applied to.
    pub mutated: Option<String>,
    /// Original class to its copy, for every class that is still a clone.
    pub expected_relocation: BTreeMap<QualifiedClassName, QualifiedClassName>,
}

const RELOCATION_PREFIXES: [&str; 3] = [
    "com.acme.configkit.shaded.yamlish",
    "io.bundle.yamlish",
    "net.fork.internal.yaml",
];

/// 40 planted candidates: five variants of each transformation.
///
/// Variant 4 copies only four classes; odd variants of the other preserving
/// transformations and even variants of the breaking ones are also relocated.
/// One relocated candidate carries a stray second copy of `Utils`.
pub fn planted_corpus() -> Vec<PlantedCandidate> {
    let original = library();
    let mut corpus = Vec::new();
    for kind in Planted::ALL {
        for variant in 0..5usize {
            let included: Vec<&str> = if variant == 4 { CLASSES[..4].to_vec() } else { CLASSES.to_vec() };
            let base: Vec<SourceFile> = original
                .iter()
                .filter(|f| included.contains(&f.class().simple_name.as_str()))
                .cloned()
                .collect();
            let relocated_to = match kind {
                Planted::VerbatimCopy | Planted::Decoy => None,
                Planted::PackageRelocation => Some(RELOCATION_PREFIXES[variant % 3]),
                k if k.preserves_clone() => (variant % 2 == 1).then(|| RELOCATION_PREFIXES[variant % 3]),
                _ => (variant % 2 == 0).then(|| RELOCATION_PREFIXES[variant % 3]),
            };
            let mutated = (!kind.preserves_clone() && kind != Planted::Decoy)
                .then(|| included[variant % included.len()].to_string());

            let mut files: Vec<SourceFile> = base
                .iter()
                .map(|f| {
                    let hit = mutated.as_deref() == Some(f.class().simple_name.as_str());
                    match kind {
                        Planted::CommentEdit => comment_edit(f),
                        Planted::WhitespaceReformat => whitespace_reformat(f),
                        Planted::StatementInsert if hit => statement_insert(f),
                        Planted::StatementDelete if hit => statement_delete(f),
                        Planted::LiteralChange if hit => literal_change(f),
                        _ => f.clone(),
                    }
                })
                .collect();
            if let Some(prefix) = relocated_to {
                files = relocate(&files, ORIGINAL_PREFIX, prefix);
            }
            if kind == Planted::Decoy {
                files = decoy(&included, &format!("org.lookalike.v{variant}"));
            }
            if kind == Planted::PackageRelocation && variant == 2 {
                files.extend(decoy(&["Utils"], "com.stray.util"));
                let mut stray = file_named(&original, "Utils").clone();
                stray = relocate(&[stray], "org.vuln.yamlish.util", "com.stray.copy")[0].clone();
                files.push(stray);
            }

            let mut expected_relocation = BTreeMap::new();
            if kind != Planted::Decoy {
                for f in &base {
                    let class = f.class();
                    if mutated.as_deref() == Some(class.simple_name.as_str()) {
                        continue;
                    }
                    let package = match relocated_to {
                        Some(prefix) => class.package.replacen(ORIGINAL_PREFIX, prefix, 1),
                        None => class.package.clone(),
                    };
                    expected_relocation.insert(class.clone(), QualifiedClassName::new(package, class.simple_name.clone()));
                }
            }
            let name = format!("{kind:?}").to_lowercase();
            corpus.push(PlantedCandidate {
                gav: Gav::new("org.planted", format!("{name}-{variant}"), "1.0").unwrap(),
                kind,
                files,
                mutated,
                expected_relocation,
            });
        }
    }
    corpus
}

/// Artifact-level truth for a candidate given the query classes: every query
/// class the candidate contains is still a clone and at least `min_cloned`
/// classes are.
pub fn expected_verdict(candidate: &PlantedCandidate, query_classes: &[String], min_cloned: usize) -> bool {
    let present: BTreeSet<String> = candidate.files.iter().map(|f| f.class().simple_name).collect();
    let cloned: BTreeSet<&str> = candidate.expected_relocation.keys().map(|c| c.simple_name.as_str()).collect();
    candidate.kind != Planted::Decoy
        && query_classes
            .iter()
            .filter(|q| present.contains(*q))
            .all(|q| cloned.contains(q.as_str()))
        && cloned.len() >= min_cloned
}
