use std::path::Path;

use serde::{Deserialize, Serialize};

use super::instantiate::{instantiate, PovInstance};
use super::project::{Expectations, PovProject, Signal};
use super::runner::BuildRunner;
use super::surefire::{parse_surefire, TestOutcome, TestState};
use super::PovError;
use crate::clone::RelocationMap;
use crate::registry::Gav;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub candidate: Gav,
    pub compiled: bool,
    pub tested: bool,
    pub outcomes: Vec<TestOutcome>,
    pub confirmed: bool,
}

/// Strict signal comparison.
///
/// Every expected test must be observed, and each of its outcomes must show
/// the expected signal. Errors anywhere reject the run. A skip satisfies an
/// expectation only for tests declared skippable, and only when the
/// environment is known not to meet their assumptions.
pub fn evaluate_outcomes(outcomes: &[TestOutcome], expected: &Expectations) -> bool {
    if outcomes.is_empty() || expected.tests.is_empty() {
        return false;
    }
    if outcomes.iter().any(|o| o.state == TestState::Error) {
        return false;
    }
    expected.tests.iter().all(|(id, want)| {
        let mut observed = outcomes.iter().filter(|o| &o.test_id == id).peekable();
        observed.peek().is_some()
            && observed.all(|o| match o.state {
                TestState::Success => want.signal == Signal::Success,
                TestState::Failure => want.signal == Signal::Failure,
                TestState::Skip => want.skippable && !expected.environment.assumptions_met,
                TestState::Error => false,
            })
    })
}

fn run_tests(instance: &PovInstance, runner: &dyn BuildRunner) -> Option<Vec<TestOutcome>> {
    let bundle = match runner.test(instance) {
        Ok(bundle) => bundle,
        Err(err) => {
            log::warn!("{}: {err}", instance.target);
            return None;
        }
    };
    match parse_surefire(&bundle) {
        Ok(outcomes) if !outcomes.is_empty() => Some(outcomes),
        Ok(_) => None,
        Err(err) => {
            log::warn!("{}: {err}", instance.target);
            None
        }
    }
}

/// Compiles, then tests, then compares signals. A failed compile skips the
/// tests; runners that allow it get one rerun when a test errors.
pub fn verify(instance: &PovInstance, runner: &dyn BuildRunner) -> VerificationResult {
    let mut result = VerificationResult {
        candidate: instance.target.clone(),
        compiled: false,
        tested: false,
        outcomes: Vec::new(),
        confirmed: false,
    };
    result.compiled = match runner.compile(instance) {
        Ok(compiled) => compiled,
        Err(err) => {
            log::warn!("{}: {err}", instance.target);
            false
        }
    };
    if !result.compiled {
        return result;
    }
    let mut outcomes = run_tests(instance, runner);
    let errored = |o: &Option<Vec<TestOutcome>>| o.iter().flatten().any(|t| t.state == TestState::Error);
    if runner.retries_errors() && errored(&outcomes) {
        log::info!("{}: rerunning tests after an error outcome", instance.target);
        outcomes = run_tests(instance, runner);
    }
    if let Some(outcomes) = outcomes {
        result.tested = true;
        result.confirmed = evaluate_outcomes(&outcomes, &instance.source_pov.expectations);
        result.outcomes = outcomes;
    }
    result
}

/// Runs the POV unchanged against its own original and requires the
/// documented signals.
pub fn self_check(pov: &PovProject, runner: &dyn BuildRunner, workspace: &Path) -> Result<VerificationResult, PovError> {
    let instance = instantiate(pov, &pov.original, &RelocationMap::new(), workspace)?;
    let result = verify(&instance, runner);
    if !result.confirmed {
        let observed = result
            .outcomes
            .iter()
            .map(|o| format!("{}={}", o.test_id, o.state))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(PovError::SelfCheckFailed {
            cve: pov.cve_id.clone(),
            observed: if result.compiled { observed } else { "does not compile".into() },
        });
    }
    Ok(result)
}
