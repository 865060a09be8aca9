//! Fixture repositories with hand-traced pipeline outcomes.
//!
//! Each scenario writes a fixture registry, a POV project and a stub runner
//! script into a temporary directory. `expected` is the stage vector traced by
//! hand from the manifest below each builder, not computed by the pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use shadescan_core::pipeline::{BackendKind, PipelineConfig, RunnerKind, Stage, StageStats, STUB_SCRIPT_FILE};
use shadescan_core::pov::{ReportFile, StubScript, StubTarget};
use shadescan_core::registry::{FixtureWriter, Gav};
use tempfile::TempDir;

use super::library::{
    decoy, library, library_class_members, relocate, statement_insert, SourceFile, CLASSES, ORIGINAL_PREFIX,
};

pub const CVE: &str = "CVE-2022-38751";
pub const TEST_CLASS: &str = "poc.AliasExpansionTest";
pub const TEST_METHOD: &str = "selfReferenceExhaustsStack";

pub fn gav(s: &str) -> Gav {
    s.parse().unwrap()
}

pub fn original() -> Gav {
    gav("org.vuln:yamlish:1.31")
}

pub fn test_id() -> String {
    format!("{TEST_CLASS}#{TEST_METHOD}")
}

pub fn pom_xml(gav: &Gav, parent: Option<&Gav>, body: &str) -> String {
    let parent = parent.map_or(String::new(), |p| {
        format!(
            "  <parent>\n    <groupId>{}</groupId>\n    <artifactId>{}</artifactId>\n    <version>{}</version>\n  </parent>\n",
            p.group(),
            p.artifact(),
            p.version()
        )
    });
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<project xmlns=\"http://maven.apache.org/POM/4.0.0\">\n  <modelVersion>4.0.0</modelVersion>\n{parent}  <groupId>{}</groupId>\n  <artifactId>{}</artifactId>\n  <version>{}</version>\n{body}</project>\n",
        gav.group(),
        gav.artifact(),
        gav.version()
    )
}

pub fn dependency_on(gav: &Gav, scope: Option<&str>) -> String {
    let scope = scope.map_or(String::new(), |s| format!("      <scope>{s}</scope>\n"));
    format!(
        "  <dependencies>\n    <dependency>\n      <groupId>{}</groupId>\n      <artifactId>{}</artifactId>\n      <version>{}</version>\n{scope}    </dependency>\n  </dependencies>\n",
        gav.group(),
        gav.artifact(),
        gav.version()
    )
}

pub fn shade_plugin(includes: &[&str], relocation: Option<(&str, &str)>) -> String {
    let includes: String = includes.iter().map(|i| format!("                <include>{i}</include>\n")).collect();
    let relocations = relocation.map_or(String::new(), |(from, to)| {
        format!(
            "              <relocations>\n                <relocation>\n                  <pattern>{from}</pattern>\n                  <shadedPattern>{to}</shadedPattern>\n                </relocation>\n              </relocations>\n"
        )
    });
    format!(
        "  <build>\n    <plugins>\n      <plugin>\n        <groupId>org.apache.maven.plugins</groupId>\n        <artifactId>maven-shade-plugin</artifactId>\n        <executions>\n          <execution>\n            <configuration>\n              <artifactSet>\n{includes}              </artifactSet>\n{relocations}            </configuration>\n          </execution>\n        </executions>\n      </plugin>\n    </plugins>\n  </build>\n"
    )
}

pub fn surefire_report(class: &str, method: &str, child: Option<&str>) -> ReportFile {
    let body = match child {
        None => "/>".to_string(),
        Some(element) => format!(">\n    <{element} message=\"observed\" type=\"java.lang.AssertionError\"/>\n  </testcase>"),
    };
    ReportFile {
        name: format!("TEST-{class}.xml"),
        content: format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<testsuite name=\"{class}\" tests=\"1\">\n  <testcase name=\"{method}\" classname=\"{class}\" time=\"0.02\"{body}\n</testsuite>\n"
        ),
    }
}

/// A run in which the POV test passes: the vulnerability is present.
pub fn vulnerable_run() -> StubTarget {
    StubTarget {
        compiles: true,
        reports: vec![surefire_report(TEST_CLASS, TEST_METHOD, None)],
    }
}

/// A run in which the POV test fails: the vulnerability is absent.
pub fn patched_run() -> StubTarget {
    StubTarget {
        compiles: true,
        reports: vec![surefire_report(TEST_CLASS, TEST_METHOD, Some("failure"))],
    }
}

pub const POV_TEST_SOURCE: &str = r#"package poc;

import static org.junit.Assert.assertThrows;

import org.junit.Test;
import org.vuln.yamlish.Yaml;
import org.vuln.yamlish.nodes.*;

public class AliasExpansionTest {
    // a self-referencing alias must not recurse without bound
    @Test
    public void selfReferenceExhaustsStack() {
        MappingNodeBuilder builder = new MappingNodeBuilder(8);
        org.vuln.yamlish.RecursiveAliasResolver resolver = new org.vuln.yamlish.RecursiveAliasResolver(builder);
        assertThrows(StackOverflowError.class, () -> resolver.resolve(resolver, 0));
        new Yaml().load("a: &a [*a]");
    }
}
"#;

/// Writes a POV project for `original` into `dir`.
pub fn write_pov(dir: &Path, original: &Gav) {
    let pov_gav = gav("poc:yamlish-pov:1.0");
    let deps = format!(
        "  <dependencies>\n    <dependency>\n      <groupId>{}</groupId>\n      <artifactId>{}</artifactId>\n      <version>{}</version>\n    </dependency>\n    <dependency>\n      <groupId>junit</groupId>\n      <artifactId>junit</artifactId>\n      <version>4.13.2</version>\n      <scope>test</scope>\n    </dependency>\n  </dependencies>\n",
        original.group(),
        original.artifact(),
        original.version()
    );
    let test_dir = dir.join("src/test/java/poc");
    fs::create_dir_all(&test_dir).unwrap();
    fs::write(dir.join("pom.xml"), pom_xml(&pov_gav, None, &deps)).unwrap();
    fs::write(test_dir.join("AliasExpansionTest.java"), POV_TEST_SOURCE).unwrap();
    let metadata = serde_json::json!({
        "schema_version": 1,
        "cve": CVE,
        "original": original.to_string(),
        "tests": { test_id(): { "signal": "success" } },
    });
    fs::write(dir.join("pov.json"), serde_json::to_vec_pretty(&metadata).unwrap()).unwrap();
}

pub fn source_pairs(files: &[SourceFile]) -> Vec<(String, String)> {
    files.iter().map(|f| (f.path.clone(), f.text.clone())).collect()
}

pub struct Scenario {
    pub name: &'static str,
    /// Keeps the fixture alive for the scenario's lifetime.
    pub dir: TempDir,
    pub config: PipelineConfig,
    pub expected: StageStats,
    /// `(candidate, stage, cause)` for every removal, in report order.
    pub expected_removals: Vec<(Gav, Stage, &'static str)>,
}

impl Scenario {
    pub fn repo(&self) -> PathBuf {
        self.dir.path().join("repo")
    }

    pub fn stub_script(&self) -> PathBuf {
        self.repo().join(STUB_SCRIPT_FILE)
    }
}

pub const SCENARIOS: [&str; 5] = [
    "shaded-clone-one-candidate",
    "dependent-candidates",
    "stage-failures",
    "classless-original",
    "no-pov",
];

struct Builder {
    dir: TempDir,
    repo: FixtureWriter,
    stub: StubScript,
}

impl Builder {
    fn new(original: &Gav, with_classes: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut repo = FixtureWriter::new(dir.path().join("repo")).unwrap();
        let lib = library();
        let members: Vec<String> = if with_classes { library_class_members() } else { vec!["META-INF/MANIFEST.MF".into()] };
        repo.put_binary(original, &members).unwrap();
        let files: &[SourceFile] = if with_classes { &lib } else { &[] };
        repo.put_sources(original, &source_pairs(files)).unwrap();
        repo.put_pom(original, &pom_xml(original, None, "")).unwrap();
        let mut stub = StubScript::default();
        stub.targets.insert(original.clone(), vulnerable_run());
        Self { dir, repo, stub }
    }

    fn candidate(&mut self, gav: &Gav, pom: Option<&str>, files: Option<&[SourceFile]>) -> &mut Self {
        if let Some(pom) = pom {
            self.repo.put_pom(gav, pom).unwrap();
        }
        if let Some(files) = files {
            self.repo.put_sources(gav, &source_pairs(files)).unwrap();
        }
        self
    }

    fn listed_under(&mut self, gav: &Gav, classes: &[&str]) -> &mut Self {
        for class in classes {
            self.repo.index(class, gav);
        }
        self
    }

    fn finish(
        self,
        name: &'static str,
        original: Gav,
        with_pov: bool,
        expected: StageStats,
        mut expected_removals: Vec<(Gav, Stage, &'static str)>,
    ) -> Scenario {
        let root = self.repo.finish().unwrap();
        fs::write(root.join(STUB_SCRIPT_FILE), serde_json::to_vec_pretty(&self.stub).unwrap()).unwrap();
        let mut config = PipelineConfig::new(original.clone(), CVE);
        if with_pov {
            let pov = self.dir.path().join("pov");
            write_pov(&pov, &original);
            config.pov_dir = Some(pov);
        }
        config.backend = BackendKind::Fixture;
        config.fixture_root = Some(root);
        config.runner = RunnerKind::Stub;
        config.work_dir = Some(self.dir.path().join("work"));
        config.worker_count = 4;
        config.build_worker_count = 2;
        expected_removals.sort_by(|a, b| (a.1, &a.0).cmp(&(b.1, &b.0)));
        Scenario {
            name,
            dir: self.dir,
            config,
            expected,
            expected_removals,
        }
    }
}

pub fn stats(values: [usize; 6], pov: Option<[usize; 4]>) -> StageStats {
    StageStats {
        query_results: values[0],
        consolidated: values[1],
        valid_pom: values[2],
        no_dependency: values[3],
        sources_acquired: values[4],
        clones_detected: values[5],
        pov_compilable: pov.map(|p| p[0]),
        pov_testable: pov.map(|p| p[1]),
        vulnerability_confirmed: pov.map(|p| p[2]),
        shaded: pov.map(|p| p[3]),
    }
}

pub fn build(name: &str) -> Scenario {
    match name {
        "shaded-clone-one-candidate" => shaded_clone_one_candidate(true),
        "no-pov" => shaded_clone_one_candidate(false),
        "dependent-candidates" => dependent_candidates(),
        "stage-failures" => stage_failures(),
        "classless-original" => classless_original(),
        other => panic!("unknown scenario {other}"),
    }
}

/// Manifest:
/// - `com.acme:config-kit:2.4.0`: full copy relocated under
///   `com.acme.configkit.shaded.yamlish`, plain pom, listed under
///   DocumentComposerFactory and RecursiveAliasResolver; the POV passes.
/// - `org.other:docs:1.0`: listed under DocumentComposerFactory only.
/// - `org.other:nodes:3.2`: listed under ScalarNodeReader only.
///
/// Trace: 3 distinct results; only config-kit is in two sets; its pom is
/// valid and independent; sources exist and all six classes are clones;
/// the POV compiles, reports and confirms; the copy is relocated.
fn shaded_clone_one_candidate(with_pov: bool) -> Scenario {
    let original = original();
    let mut b = Builder::new(&original, true);
    let clone = gav("com.acme:config-kit:2.4.0");
    let docs = gav("org.other:docs:1.0");
    let nodes = gav("org.other:nodes:3.2");
    let relocated = relocate(&library(), ORIGINAL_PREFIX, "com.acme.configkit.shaded.yamlish");
    b.candidate(&clone, Some(&pom_xml(&clone, None, "")), Some(&relocated))
        .listed_under(&clone, &["DocumentComposerFactory", "RecursiveAliasResolver"]);
    b.candidate(&docs, Some(&pom_xml(&docs, None, "")), Some(&decoy(&["DocumentComposerFactory"], "org.other.docs")))
        .listed_under(&docs, &["DocumentComposerFactory"]);
    b.candidate(&nodes, Some(&pom_xml(&nodes, None, "")), None)
        .listed_under(&nodes, &["ScalarNodeReader"]);
    b.stub.targets.insert(clone.clone(), vulnerable_run());
    let (name, pov) = if with_pov {
        ("shaded-clone-one-candidate", Some([1, 1, 1, 1]))
    } else {
        ("no-pov", None)
    };
    b.finish(
        name,
        original,
        with_pov,
        stats([3, 1, 1, 1, 1, 1], pov),
        vec![
            (docs, Stage::Consolidated, "below-threshold"),
            (nodes, Stage::Consolidated, "below-threshold"),
        ],
    )
}

/// Manifest, every candidate listed under the two top query classes:
/// - the original itself and `org.vuln:yamlish:1.30` (same GA);
/// - `com.a:uses-yaml:1.0` declares a test-scoped dependency on the original;
/// - `com.b:bundle:1.0` names the original in its shade plugin artifact set;
/// - `com.c:module:1.0` inherits from `com.c:parent:1.0`, which depends on it;
/// - `com.d:yaml-fork:0.9` is an unrelocated copy with a plain pom.
///
/// Trace: 6 results, all consolidated, all poms valid; five are removed as
/// dependents, the fork is a clone, builds and confirms without shading.
fn dependent_candidates() -> Scenario {
    let original = original();
    let mut b = Builder::new(&original, true);
    let top = ["DocumentComposerFactory", "RecursiveAliasResolver"];
    let older = gav("org.vuln:yamlish:1.30");
    let uses = gav("com.a:uses-yaml:1.0");
    let bundle = gav("com.b:bundle:1.0");
    let parent = gav("com.c:parent:1.0");
    let module = gav("com.c:module:1.0");
    let fork = gav("com.d:yaml-fork:0.9");
    let lib = library();
    b.listed_under(&original, &top);
    b.candidate(&older, Some(&pom_xml(&older, None, "")), Some(&lib)).listed_under(&older, &top);
    b.candidate(&uses, Some(&pom_xml(&uses, None, &dependency_on(&original, Some("test")))), Some(&lib))
        .listed_under(&uses, &top);
    b.candidate(&bundle, Some(&pom_xml(&bundle, None, &shade_plugin(&["org.vuln:yamlish"], None))), Some(&lib))
        .listed_under(&bundle, &top);
    b.candidate(&parent, Some(&pom_xml(&parent, None, &dependency_on(&original, None))), None);
    b.candidate(&module, Some(&pom_xml(&module, Some(&parent), "")), Some(&lib))
        .listed_under(&module, &top);
    b.candidate(&fork, Some(&pom_xml(&fork, None, "")), Some(&lib)).listed_under(&fork, &top);
    b.stub.targets.insert(fork.clone(), vulnerable_run());
    b.finish(
        "dependent-candidates",
        original.clone(),
        true,
        stats([6, 6, 6, 1, 1, 1], Some([1, 1, 1, 0])),
        vec![
            (original, Stage::NoDependency, "same-ga"),
            (older, Stage::NoDependency, "same-ga"),
            (uses, Stage::NoDependency, "declares-dependency"),
            (bundle, Stage::NoDependency, "shades-dependency"),
            (module, Stage::NoDependency, "parent-references-original"),
        ],
    )
}

/// Manifest, every candidate listed under the two top query classes unless
/// noted, all with plain poms unless noted:
/// - `com.e:stray:1.0`: listed under one class only;
/// - `com.e:no-pom:1.0`: no pom; `com.e:bad-pom:1.0`: truncated pom;
/// - `com.e:no-sources:1.0`: no sources archive;
/// - `com.e:lookalike:1.0`: same class names, different bodies;
/// - `com.e:patched-fork:1.0`: copy with a statement added to
///   RecursiveAliasResolver;
/// - `com.e:broken-build:1.0`: relocated copy the POV does not compile against;
/// - `com.e:silent:1.0`: relocated copy whose test run reports nothing;
/// - `com.e:fixed-fork:1.0`: relocated copy on which the POV test fails;
/// - `com.e:vendored:1.0`: relocated copy, POV passes;
/// - `com.e:verbatim:1.0`: unrelocated copy, POV passes.
///
/// Trace: 11 results, 10 consolidated, 8 valid poms, 8 independent, 7 with
/// sources, 5 clones, 4 compile, 3 report, 2 confirmed, 1 relocated.
fn stage_failures() -> Scenario {
    let original = original();
    let mut b = Builder::new(&original, true);
    let top = ["DocumentComposerFactory", "RecursiveAliasResolver"];
    let lib = library();
    let shaded = |prefix: &str| relocate(&lib, ORIGINAL_PREFIX, prefix);
    let plain = |g: &Gav| pom_xml(g, None, "");
    let g = |a: &str| gav(&format!("com.e:{a}:1.0"));

    b.candidate(&g("stray"), Some(&plain(&g("stray"))), Some(&lib))
        .listed_under(&g("stray"), &top[..1]);
    b.candidate(&g("no-pom"), None, Some(&lib)).listed_under(&g("no-pom"), &top);
    b.candidate(&g("bad-pom"), Some("<project><groupId>com.e</groupId><artifactId>bad-pom"), Some(&lib))
        .listed_under(&g("bad-pom"), &top);
    b.candidate(&g("no-sources"), Some(&plain(&g("no-sources"))), None)
        .listed_under(&g("no-sources"), &top);
    b.candidate(&g("lookalike"), Some(&plain(&g("lookalike"))), Some(&decoy(&CLASSES, "com.e.lookalike")))
        .listed_under(&g("lookalike"), &top);
    let patched: Vec<SourceFile> = lib
        .iter()
        .map(|f| if f.class().simple_name == "RecursiveAliasResolver" { statement_insert(f) } else { f.clone() })
        .collect();
    b.candidate(&g("patched-fork"), Some(&plain(&g("patched-fork"))), Some(&patched))
        .listed_under(&g("patched-fork"), &top);
    for (artifact, prefix) in [
        ("broken-build", "com.e.broken.yamlish"),
        ("silent", "com.e.silent.yamlish"),
        ("fixed-fork", "com.e.fixed.yamlish"),
        ("vendored", "com.e.vendored.yamlish"),
    ] {
        b.candidate(&g(artifact), Some(&plain(&g(artifact))), Some(&shaded(prefix)))
            .listed_under(&g(artifact), &top);
    }
    b.candidate(&g("verbatim"), Some(&plain(&g("verbatim"))), Some(&lib))
        .listed_under(&g("verbatim"), &top);
    b.stub.targets.insert(
        g("broken-build"),
        StubTarget {
            compiles: false,
            reports: Vec::new(),
        },
    );
    b.stub.targets.insert(g("fixed-fork"), patched_run());
    b.stub.targets.insert(g("vendored"), vulnerable_run());
    b.stub.targets.insert(g("verbatim"), vulnerable_run());
    b.finish(
        "stage-failures",
        original,
        true,
        stats([11, 10, 8, 8, 7, 5], Some([4, 3, 2, 1])),
        vec![
            (g("stray"), Stage::Consolidated, "below-threshold"),
            (g("no-pom"), Stage::ValidPom, "pom-unavailable"),
            (g("bad-pom"), Stage::ValidPom, "pom-malformed"),
            (g("no-sources"), Stage::SourcesAcquired, "sources-unavailable"),
            (g("lookalike"), Stage::ClonesDetected, "not-a-clone"),
            (g("patched-fork"), Stage::ClonesDetected, "not-a-clone"),
            (g("broken-build"), Stage::PovCompilable, "compile-failed"),
            (g("silent"), Stage::PovTestable, "no-test-results"),
            (g("fixed-fork"), Stage::VulnerabilityConfirmed, "signal-mismatch"),
        ],
    )
}

/// Manifest: the original's binary archive holds only a manifest, so no
/// class names can be queried. Trace: every stage is zero.
fn classless_original() -> Scenario {
    let original = gav("org.vuln:yamlish-all:1.31");
    let b = Builder::new(&original, false);
    b.finish("classless-original", original, true, stats([0; 6], Some([0; 4])), Vec::new())
}
