//! Declarative per-bug oracles.
//!
//! An [`OracleSpec`] classifies one [`RunObservation`] as PASSING, FAILING
//! or UNDEFINED. Timeouts and the optional `undefined_when` rule are decided
//! first; only a complete observation reaches `failing_when`.

mod format;
mod pattern;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use format::{load_oracle_spec, serialize_oracle_spec, OracleSpecError};
pub use pattern::{Pattern, PatternError};

use crate::grammar::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TestResult {
    Passing,
    Failing,
    Undefined,
}

impl fmt::Display for TestResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestResult::Passing => "PASSING",
            TestResult::Failing => "FAILING",
            TestResult::Undefined => "UNDEFINED",
        })
    }
}

/// The expected outcome of a curated or generated test. Never undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Passing,
    Failing,
}

impl Label {
    pub fn as_result(self) -> TestResult {
        match self {
            Label::Passing => TestResult::Passing,
            Label::Failing => TestResult::Failing,
        }
    }

    /// Lower-case form used in generated file names.
    pub fn file_tag(self) -> &'static str {
        match self {
            Label::Passing => "passing",
            Label::Failing => "failing",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_result().fmt(f)
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PASSING" => Ok(Label::Passing),
            "FAILING" => Ok(Label::Failing),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

/// Evidence captured from one harness execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunObservation {
    /// Absent when the process timed out or was killed by a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
    pub timed_out: bool,
    /// Workspace-relative paths that did not exist before the run.
    pub created_files: Vec<String>,
    pub tokens: Vec<String>,
}

/// Output of the fixed-behavior reference command for the same tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceOutput {
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Neq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Stdout,
    Stderr,
}

impl Channel {
    fn name(self) -> &'static str {
        match self {
            Channel::Stdout => "stdout",
            Channel::Stderr => "stderr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    ExitCodeIs(Relation, i64),
    StdoutContains(String),
    StderrContains(String),
    StdoutMatchesPattern(Pattern),
    FileExists(String),
    FeaturePresent(String),
    FeatureEquals(String, String),
    RefDiffers(Channel),
    All(Vec<Predicate>),
    Any(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    fn uses_reference(&self) -> bool {
        match self {
            Predicate::RefDiffers(_) => true,
            Predicate::All(ps) | Predicate::Any(ps) => ps.iter().any(Predicate::uses_reference),
            Predicate::Not(p) => p.uses_reference(),
            _ => false,
        }
    }

    /// Children are always all evaluated, so the verdict cannot depend on
    /// their order.
    fn holds(&self, obs: &RunObservation, feats: &FeatureMap, reference: Option<&ReferenceOutput>) -> bool {
        match self {
            Predicate::ExitCodeIs(rel, value) => {
                let equal = obs.exit_code.is_some_and(|c| i64::from(c) == *value);
                match rel {
                    Relation::Eq => equal,
                    Relation::Neq => !equal,
                }
            }
            Predicate::StdoutContains(text) => obs.stdout.contains(text.as_str()),
            Predicate::StderrContains(text) => obs.stderr.contains(text.as_str()),
            Predicate::StdoutMatchesPattern(p) => p.is_match(&obs.stdout),
            Predicate::FileExists(path) => {
                let want = normalize_rel(path);
                obs.created_files.iter().any(|f| normalize_rel(f) == want)
            }
            Predicate::FeaturePresent(nt) => !feats.get(nt).is_empty(),
            Predicate::FeatureEquals(nt, text) => feats.get(nt).iter().any(|v| v == text),
            Predicate::RefDiffers(channel) => {
                let reference = reference.expect("reference presence checked before evaluation");
                let (ours, theirs) = match channel {
                    Channel::Stdout => (&obs.stdout, &reference.stdout),
                    Channel::Stderr => (&obs.stderr, &reference.stderr),
                };
                ours.trim_end() != theirs.trim_end()
            }
            Predicate::All(ps) => ps.iter().map(|p| p.holds(obs, feats, reference)).fold(true, |a, b| a & b),
            Predicate::Any(ps) => ps.iter().map(|p| p.holds(obs, feats, reference)).fold(false, |a, b| a | b),
            Predicate::Not(p) => !p.holds(obs, feats, reference),
        }
    }
}

fn normalize_rel(path: &str) -> &str {
    let mut p = path.trim_end_matches('/');
    while let Some(rest) = p.strip_prefix("./") {
        p = rest;
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleSpec {
    pub undefined_when: Option<Predicate>,
    pub failing_when: Predicate,
}

impl OracleSpec {
    pub fn new(failing_when: Predicate) -> Self {
        OracleSpec {
            undefined_when: None,
            failing_when,
        }
    }

    pub fn with_undefined_when(mut self, p: Predicate) -> Self {
        self.undefined_when = Some(p);
        self
    }

    /// Whether evaluation needs a reference run.
    pub fn uses_reference(&self) -> bool {
        self.failing_when.uses_reference() || self.undefined_when.as_ref().is_some_and(Predicate::uses_reference)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle compares against a reference run but no reference output was supplied")]
    MissingReference,
}

pub fn evaluate(
    spec: &OracleSpec,
    obs: &RunObservation,
    feats: &FeatureMap,
    reference: Option<&ReferenceOutput>,
) -> Result<TestResult, OracleError> {
    if spec.uses_reference() && reference.is_none() {
        return Err(OracleError::MissingReference);
    }
    if obs.timed_out {
        return Ok(TestResult::Undefined);
    }
    if let Some(p) = &spec.undefined_when {
        if p.holds(obs, feats, reference) {
            return Ok(TestResult::Undefined);
        }
    }
    Ok(if spec.failing_when.holds(obs, feats, reference) {
        TestResult::Failing
    } else {
        TestResult::Passing
    })
}
