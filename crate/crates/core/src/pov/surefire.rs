//! Surefire XML test reports.
//!
//! A report is a `testsuite` (or a `testsuites` wrapper) of `testcase`
//! elements. A testcase with a `failure`, `error` or `skipped` child is in
//! that state; one without is a success. Rerun children (`flakyFailure`,
//! `rerunFailure`, ...) do not change the state.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::PovError;
use crate::pom::parse_document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestState {
    Success,
    Failure,
    Error,
    Skip,
}

impl fmt::Display for TestState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Success => "success",
            Self::Failure => "failure",
            Self::Error => "error",
            Self::Skip => "skip",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    /// `package.Class#method`.
    pub test_id: String,
    pub state: TestState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Report files produced by one test run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub files: Vec<ReportFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFile {
    pub name: String,
    pub content: String,
}

impl ReportBundle {
    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// Method name without the parameter list or invocation index some
/// providers append, e.g. `attack()` or `attack(String)[2]`.
fn method_name(name: &str) -> &str {
    let cut = name.find(['(', '[']).unwrap_or(name.len());
    name[..cut].trim()
}

pub fn parse_surefire(bundle: &ReportBundle) -> Result<Vec<TestOutcome>, PovError> {
    let mut outcomes = Vec::new();
    for file in &bundle.files {
        let malformed = |message: String| PovError::MalformedReport {
            file: file.name.clone(),
            message,
        };
        let doc = parse_document(file.content.as_bytes()).map_err(|e| malformed(e.to_string()))?;
        let root = doc.root_element().tag_name().name();
        if root != "testsuite" && root != "testsuites" {
            return Err(malformed(format!("root element is <{root}>")));
        }
        for case in doc
            .descendants()
            .filter(|n| n.is_element() && n.tag_name().name() == "testcase")
        {
            let name = case.attribute("name").ok_or_else(|| malformed("testcase without name".into()))?;
            let class = case
                .attribute("classname")
                .or_else(|| case.ancestors().find_map(|a| a.attribute("name").filter(|_| a != case)))
                .unwrap_or_default();
            let mut state = TestState::Success;
            let mut message = None;
            for child in case.children().filter(|c| c.is_element()) {
                let observed = match child.tag_name().name() {
                    "error" => TestState::Error,
                    "failure" => TestState::Failure,
                    "skipped" => TestState::Skip,
                    _ => continue,
                };
                // error outranks failure outranks skip
                let rank = |s: TestState| match s {
                    TestState::Error => 3,
                    TestState::Failure => 2,
                    TestState::Skip => 1,
                    TestState::Success => 0,
                };
                if rank(observed) > rank(state) {
                    state = observed;
                    message = child
                        .attribute("message")
                        .map(str::to_string)
                        .or_else(|| child.attribute("type").map(str::to_string));
                }
            }
            outcomes.push(TestOutcome {
                test_id: format!("{class}#{}", method_name(name)),
                state,
                message,
            });
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(xml: &str) -> ReportBundle {
        ReportBundle {
            files: vec![ReportFile {
                name: "TEST-p.T.xml".into(),
                content: xml.into(),
            }],
        }
    }

    #[test]
    fn four_states() {
        let xml = r#"<?xml version="1.0" encoding="UTF-8"?>
<testsuite name="p.T" tests="4">
  <testcase name="ok" classname="p.T" time="0.1"/>
  <testcase name="bad" classname="p.T"><failure message="expected" type="AssertionError">trace</failure></testcase>
  <testcase name="boom()" classname="p.T"><error type="java.lang.IllegalStateException"/></testcase>
  <testcase name="skipped" classname="p.T"><skipped message="assumption"/></testcase>
  <testcase name="flaky" classname="p.T"><flakyFailure/><system-out>x</system-out></testcase>
</testsuite>"#;
        let outcomes = parse_surefire(&bundle(xml)).unwrap();
        let states: Vec<(&str, TestState)> = outcomes.iter().map(|o| (o.test_id.as_str(), o.state)).collect();
        assert_eq!(
            states,
            [
                ("p.T#ok", TestState::Success),
                ("p.T#bad", TestState::Failure),
                ("p.T#boom", TestState::Error),
                ("p.T#skipped", TestState::Skip),
                ("p.T#flaky", TestState::Success),
            ]
        );
        assert_eq!(outcomes[1].message.as_deref(), Some("expected"));
    }

    #[test]
    fn classname_falls_back_to_the_suite() {
        let outcomes = parse_surefire(&bundle(r#"<testsuite name="p.S"><testcase name="t(String)[1]"/></testsuite>"#)).unwrap();
        assert_eq!(outcomes[0].test_id, "p.S#t");
    }

    #[test]
    fn empty_bundle_is_empty() {
        assert!(parse_surefire(&ReportBundle::default()).unwrap().is_empty());
    }

    #[test]
    fn malformed_reports_are_errors() {
        assert!(parse_surefire(&bundle("<testsuite><testcase name=")).is_err());
        assert!(parse_surefire(&bundle("<html/>")).is_err());
    }
}
