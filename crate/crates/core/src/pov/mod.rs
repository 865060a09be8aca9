//! Proof-of-vulnerability projects.
//!
//! A POV is a Maven project whose tests exercise a vulnerability through a
//! dependency on the original artifact, plus a `pov.json` file recording the
//! signal each test shows when the vulnerability is present:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "cve": "CVE-2022-38751",
//!   "original": "org.yaml:snakeyaml:1.31",
//!   "tests": { "poc.PovTest#stackOverflow": { "signal": "success", "skippable": false } },
//!   "environment": { "assumptions_met": true },
//!   "payload_files": ["src/test/resources/CVE-2022-38751.yml"]
//! }
//! ```
//!
//! An instance is a copy of the project retargeted at a candidate clone. A
//! candidate is confirmed when the instance compiles, its tests run, and the
//! observed signals match.

use std::io;
use std::path::PathBuf;

mod instantiate;
mod project;
mod runner;
mod surefire;
mod verify;

pub use instantiate::{instantiate, retarget, PovInstance, RewriteSummary};
pub use project::{
    load_pov, Environment, ExpectedTest, Expectations, PovMetadata, PovProject, Signal, METADATA_FILE,
    METADATA_SCHEMA_VERSION, TEST_SOURCES,
};
pub use runner::{
    read_reports, run_build, syntactic_check, BuildOutput, BuildRunner, MavenRunner, Phase, RunnerError, StubRunner,
    StubScript, StubTarget, DEFAULT_BUILD_TIMEOUT,
};
pub use surefire::{parse_surefire, ReportBundle, ReportFile, TestOutcome, TestState};
pub use verify::{evaluate_outcomes, self_check, verify, VerificationResult};

#[derive(Debug, thiserror::Error)]
pub enum PovError {
    #[error("{}: missing or unreadable POV metadata: {message}", path.display())]
    MissingMetadata { path: PathBuf, message: String },
    #[error("{}: {message}", root.display())]
    InvalidProject { root: PathBuf, message: String },
    #[error("expected signal for unknown test {test_id}")]
    UnknownTest { test_id: String },
    #[error("{}: {reference} is not covered by the relocation map", file.display())]
    UnmappedReference { file: PathBuf, reference: String },
    #[error("malformed test report {file}: {message}")]
    MalformedReport { file: String, message: String },
    #[error("POV for {cve} does not show its documented signals on the original: {observed}")]
    SelfCheckFailed { cve: String, observed: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
