use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::{copy_tree, io_err, ExecError, Variant, Workspace};
use crate::fuzzing::{detokenize, list_indexed_files, tokenize, LabeledTest, SYSTEM_TEST_PREFIX};
use crate::grammar::{features, parse_input};
use crate::oracle::{Label, TestResult};
use crate::registry::TestCaseRecord;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    #[serde(rename = "PASSING")]
    pub passing: usize,
    #[serde(rename = "FAILING")]
    pub failing: usize,
    #[serde(rename = "UNDEFINED")]
    pub undefined: usize,
}

impl Totals {
    pub fn count(&mut self, result: TestResult) {
        match result {
            TestResult::Passing => self.passing += 1,
            TestResult::Failing => self.failing += 1,
            TestResult::Undefined => self.undefined += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.passing + self.failing + self.undefined
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub tokens: Vec<String>,
    pub result: TestResult,
    pub expected: Option<Label>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportEntry {
    pub fn new(tokens: Vec<String>, result: TestResult, expected: Option<Label>, duration_ms: u64) -> Self {
        ReportEntry {
            name: None,
            tokens,
            result,
            expected,
            matches: expected.map(|l| l.as_result() == result),
            duration_ms,
            error: None,
        }
    }
}

/// Per-test outcomes of one session on one workspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestReport {
    pub project: String,
    pub bug_id: u32,
    pub variant: Variant,
    pub entries: Vec<ReportEntry>,
    pub totals: Totals,
}

impl TestReport {
    pub fn new(ws: &Workspace, entries: Vec<ReportEntry>) -> Self {
        let mut totals = Totals::default();
        entries.iter().for_each(|e| totals.count(e.result));
        TestReport {
            project: ws.bug().project().to_string(),
            bug_id: ws.bug().bug_id(),
            variant: ws.variant(),
            entries,
            totals,
        }
    }

    /// True if any entry is FAILING or UNDEFINED.
    pub fn has_failures(&self) -> bool {
        self.totals.failing > 0 || self.totals.undefined > 0
    }

    pub fn all_match(&self) -> bool {
        self.entries.iter().all(|e| e.matches != Some(false))
    }

    /// Copy with every duration zeroed, for comparing reruns.
    pub fn without_durations(&self) -> Self {
        let mut copy = self.clone();
        copy.entries.iter_mut().for_each(|e| e.duration_ms = 0);
        copy
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn write(&self, path: &Path) -> Result<(), ExecError> {
        fs::write(path, self.to_json()).map_err(io_err(path))
    }
}

pub enum TestSource {
    /// A directory of `t4p_systemtest_<index>_<label>` files.
    Directory(PathBuf),
    Records(Vec<TestCaseRecord>),
    Labeled(Vec<LabeledTest>),
}

struct Pending {
    name: Option<String>,
    input: Result<String, String>,
    expected: Option<Label>,
}

fn pending_tests(source: TestSource) -> Result<Vec<Pending>, ExecError> {
    Ok(match source {
        TestSource::Directory(dir) => list_indexed_files(&dir, SYSTEM_TEST_PREFIX)
            .map_err(io_err(&dir))?
            .into_iter()
            .map(|(_, label, path)| Pending {
                name: path.file_name().map(|n| n.to_string_lossy().into_owned()),
                input: fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display())),
                expected: Some(label),
            })
            .collect(),
        TestSource::Records(records) => records
            .into_iter()
            .map(|r| Pending {
                name: None,
                input: Ok(detokenize(&r.tokens)),
                expected: Some(r.label),
            })
            .collect(),
        TestSource::Labeled(tests) => tests
            .into_iter()
            .map(|t| Pending {
                name: None,
                input: Ok(t.input),
                expected: Some(t.label),
            })
            .collect(),
    })
}

fn run_one(ws: &Workspace, dir: &Path, test: &Pending) -> Result<ReportEntry, ExecError> {
    let mut entry = classify_one(ws, dir, test)?;
    entry.name = test.name.clone();
    Ok(entry)
}

fn classify_one(ws: &Workspace, dir: &Path, test: &Pending) -> Result<ReportEntry, ExecError> {
    let input = match &test.input {
        Ok(input) => input,
        Err(message) => {
            let mut entry = ReportEntry::new(Vec::new(), TestResult::Undefined, test.expected, 0);
            entry.error = Some(message.clone());
            return Ok(entry);
        }
    };
    let tokens = tokenize(input);
    let tree = match parse_input(ws.bug().grammar(), input) {
        Ok(tree) => tree,
        Err(e) => {
            let mut entry = ReportEntry::new(tokens, TestResult::Undefined, test.expected, 0);
            entry.error = Some(format!("input {input:?} is not in the bug's grammar: {e}"));
            return Ok(entry);
        }
    };
    let (obs, result) = ws.classify_in(dir, &tokens, &features(&tree))?;
    Ok(ReportEntry::new(tokens, result, test.expected, obs.duration_ms))
}

/// Runs a test set on a compiled workspace and classifies every test.
///
/// With `width > 1`, tests run on that many worker threads, each in a
/// private copy of the workspace; entries keep the input order regardless.
pub fn test_system_set(ws: &Workspace, source: TestSource, width: usize) -> Result<TestReport, ExecError> {
    ws.require_compiled()?;
    let tests = pending_tests(source)?;
    if width <= 1 || tests.len() <= 1 {
        let entries = tests
            .iter()
            .map(|t| run_one(ws, ws.root(), t))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(TestReport::new(ws, entries));
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<ReportEntry, ExecError>>>> = Mutex::new((0..tests.len()).map(|_| None).collect());
    std::thread::scope(|scope| -> Result<(), ExecError> {
        let mut handles = Vec::new();
        for _ in 0..width.min(tests.len()) {
            let scratch = TempDir::new().map_err(io_err(Path::new("<tempdir>")))?;
            copy_tree(ws.root(), scratch.path())?;
            let (next, slots, tests) = (&next, &slots, &tests);
            handles.push(scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= tests.len() {
                    drop(scratch);
                    return;
                }
                let entry = run_one(ws, scratch.path(), &tests[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(entry);
            }));
        }
        Ok(())
    })?;
    let entries = slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|slot| slot.expect("every slot is filled"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TestReport::new(ws, entries))
}
