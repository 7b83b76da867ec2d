//! The bugs database: a manifest of per-bug JSON descriptors, each pointing
//! at a buggy source tree, a fix patch, grammars, an oracle, curated tests
//! and a unit-test template. Every path is relative to the registry root.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fuzzing::detokenize;
use crate::grammar::{load_grammar, parse_input, Grammar, GrammarError};
use crate::oracle::{load_oracle_spec, Label, OracleSpec, OracleSpecError};

pub const MANIFEST_FILE: &str = "benchmark.json";

/// Number of curated tests per bug, and per label.
pub const CURATED_TOTAL: usize = 20;
pub const CURATED_PER_LABEL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LabelingMode {
    /// Labels come from dedicated failing/passing sub-grammars.
    Grammar,
    /// Candidates from the main grammar are labeled by running the oracle.
    OracleFilter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BugEntry {
    pub project: String,
    pub bug_id: u32,
    pub description: String,
    pub source_dir: PathBuf,
    pub patch_file: PathBuf,
    pub compile_cmds: Vec<Vec<String>>,
    pub harness_cmd: Vec<String>,
    pub unit_runner_cmd: Vec<String>,
    pub grammar_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_grammar_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passing_grammar_file: Option<PathBuf>,
    pub labeling_mode: LabelingMode,
    pub oracle_file: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_cmd: Option<Vec<String>>,
    pub curated_tests_file: PathBuf,
    pub unit_template_file: PathBuf,
    pub timeout_ms: u64,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
}

impl BugEntry {
    pub fn from_descriptor(text: &str) -> Result<BugEntry, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_descriptor(&self) -> String {
        serde_json::to_string_pretty(self).expect("descriptor fields always serialize")
    }

    /// Structural checks that need no file system access.
    fn check(&self) -> Result<(), (&'static str, String)> {
        let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c));
        if !ident(&self.project) {
            return Err(("project", format!("{:?} is not an identifier", self.project)));
        }
        if self.bug_id == 0 {
            return Err(("bug_id", "must be positive".into()));
        }
        if self.timeout_ms == 0 {
            return Err(("timeout_ms", "must be positive".into()));
        }
        if self.harness_cmd.is_empty() {
            return Err(("harness_cmd", "must not be empty".into()));
        }
        if self.unit_runner_cmd.is_empty() {
            return Err(("unit_runner_cmd", "must not be empty".into()));
        }
        if self.compile_cmds.iter().any(Vec::is_empty) {
            return Err(("compile_cmds", "commands must not be empty".into()));
        }
        if self.reference_cmd.as_ref().is_some_and(Vec::is_empty) {
            return Err(("reference_cmd", "must not be empty".into()));
        }
        if self.labeling_mode == LabelingMode::Grammar {
            if self.failing_grammar_file.is_none() {
                return Err(("failing_grammar_file", "required in GRAMMAR labeling mode".into()));
            }
            if self.passing_grammar_file.is_none() {
                return Err(("passing_grammar_file", "required in GRAMMAR labeling mode".into()));
            }
        }
        for (field, path) in self.file_fields() {
            if path.is_absolute() {
                return Err((field, format!("{} must be relative to the registry root", path.display())));
            }
        }
        Ok(())
    }

    fn file_fields(&self) -> Vec<(&'static str, &Path)> {
        let mut out = vec![
            ("source_dir", self.source_dir.as_path()),
            ("patch_file", self.patch_file.as_path()),
            ("grammar_file", self.grammar_file.as_path()),
            ("oracle_file", self.oracle_file.as_path()),
            ("curated_tests_file", self.curated_tests_file.as_path()),
            ("unit_template_file", self.unit_template_file.as_path()),
        ];
        if let Some(p) = &self.failing_grammar_file {
            out.push(("failing_grammar_file", p));
        }
        if let Some(p) = &self.passing_grammar_file {
            out.push(("passing_grammar_file", p));
        }
        out
    }
}

/// One curated system test.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCaseRecord {
    pub tokens: Vec<String>,
    pub label: Label,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{}: file not found", path.display())]
    Missing { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}: field `{field}`: {message}", path.display())]
    Invalid {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("duplicate bug {project} #{bug_id} in {} and {}", first.display(), second.display())]
    Conflict {
        project: String,
        bug_id: u32,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("{}: {source}", path.display())]
    Grammar { path: PathBuf, source: GrammarError },
    #[error("{}: {source}", path.display())]
    Oracle { path: PathBuf, source: OracleSpecError },
    #[error("{}:{line}: {message}", path.display())]
    Curated { path: PathBuf, line: usize, message: String },
    #[error("no bug {project} #{bug_id}; {available}")]
    NotFound {
        project: String,
        bug_id: u32,
        available: String,
    },
}

fn read(path: &Path) -> Result<String, RegistryError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            RegistryError::Missing { path: path.to_path_buf() }
        } else {
            RegistryError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn json_error(path: &Path, e: serde_json::Error) -> RegistryError {
    RegistryError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// A bug entry with its grammars, oracle and curated tests loaded.
#[derive(Debug, Clone)]
pub struct Bug {
    entry: BugEntry,
    root: PathBuf,
    descriptor: PathBuf,
    grammar: Grammar,
    failing_grammar: Option<Grammar>,
    passing_grammar: Option<Grammar>,
    oracle: OracleSpec,
    curated: Vec<TestCaseRecord>,
}

impl Bug {
    /// Loads and validates one descriptor; `root` is the registry root.
    pub fn load(root: &Path, descriptor: &Path) -> Result<Bug, RegistryError> {
        let text = read(descriptor)?;
        let entry = BugEntry::from_descriptor(&text).map_err(|e| json_error(descriptor, e))?;
        Bug::from_entry(root, descriptor, entry)
    }

    pub fn from_entry(root: &Path, descriptor: &Path, entry: BugEntry) -> Result<Bug, RegistryError> {
        let invalid = |field: &str, message: String| RegistryError::Invalid {
            path: descriptor.to_path_buf(),
            field: field.to_string(),
            message,
        };
        entry.check().map_err(|(f, m)| invalid(f, m))?;
        for (_, rel) in entry.file_fields() {
            let full = root.join(rel);
            if !full.exists() {
                return Err(RegistryError::Missing { path: full });
            }
        }
        let grammar_at = |rel: &Path| -> Result<Grammar, RegistryError> {
            let path = root.join(rel);
            load_grammar(&read(&path)?).map_err(|source| RegistryError::Grammar { path, source })
        };
        let grammar = grammar_at(&entry.grammar_file)?;
        let failing_grammar = entry.failing_grammar_file.as_deref().map(grammar_at).transpose()?;
        let passing_grammar = entry.passing_grammar_file.as_deref().map(grammar_at).transpose()?;

        let oracle_path = root.join(&entry.oracle_file);
        let oracle = load_oracle_spec(&read(&oracle_path)?).map_err(|source| RegistryError::Oracle {
            path: oracle_path.clone(),
            source,
        })?;
        if oracle.uses_reference() && entry.reference_cmd.is_none() {
            return Err(invalid(
                "reference_cmd",
                "the oracle compares against a reference run but no reference_cmd is given".into(),
            ));
        }

        let curated_path = root.join(&entry.curated_tests_file);
        let curated = load_curated(&read(&curated_path)?, &curated_path, &grammar)?;

        Ok(Bug {
            entry,
            root: root.to_path_buf(),
            descriptor: descriptor.to_path_buf(),
            grammar,
            failing_grammar,
            passing_grammar,
            oracle,
            curated,
        })
    }

    pub fn entry(&self) -> &BugEntry {
        &self.entry
    }

    pub fn project(&self) -> &str {
        &self.entry.project
    }

    pub fn bug_id(&self) -> u32 {
        self.entry.bug_id
    }

    /// Registry root the entry's relative paths resolve against.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn descriptor_path(&self) -> &Path {
        &self.descriptor
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    pub fn failing_grammar(&self) -> Option<&Grammar> {
        self.failing_grammar.as_ref()
    }

    pub fn passing_grammar(&self) -> Option<&Grammar> {
        self.passing_grammar.as_ref()
    }

    pub fn oracle(&self) -> &OracleSpec {
        &self.oracle
    }

    pub fn curated(&self) -> &[TestCaseRecord] {
        &self.curated
    }

    /// Checks the curated-set shape: 20 records, 10 per label.
    pub fn check_curated_contract(&self) -> Result<(), String> {
        let failing = self.curated.iter().filter(|t| t.label == Label::Failing).count();
        let passing = self.curated.len() - failing;
        if self.curated.len() == CURATED_TOTAL && failing == CURATED_PER_LABEL && passing == CURATED_PER_LABEL {
            Ok(())
        } else {
            Err(format!(
                "{} #{}: {} curated tests ({failing} FAILING, {passing} PASSING), expected {CURATED_TOTAL} \
                 ({CURATED_PER_LABEL} per label)",
                self.project(),
                self.bug_id(),
                self.curated.len()
            ))
        }
    }
}

/// Parses a JSON-lines curated test file; every record must parse under
/// `grammar` once detokenized. Blank lines are skipped.
pub fn load_curated(text: &str, path: &Path, grammar: &Grammar) -> Result<Vec<TestCaseRecord>, RegistryError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| RegistryError::Curated {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record: TestCaseRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let input = detokenize(&record.tokens);
        if let Err(e) = parse_input(grammar, &input) {
            return Err(err(format!("{input:?} is not in the bug's input grammar ({e})")));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_curated(records: &[TestCaseRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records always serialize") + "\n")
        .collect()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    bugs: Vec<PathBuf>,
}

/// The loaded bugs database. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Registry {
    root: PathBuf,
    bugs: Vec<Bug>,
}

pub fn load_registry(root: &Path) -> Result<Registry, RegistryError> {
    let root = root.canonicalize().map_err(|_| RegistryError::Missing {
        path: root.to_path_buf(),
    })?;
    let manifest_path = root.join(MANIFEST_FILE);
    let manifest: Manifest =
        serde_json::from_str(&read(&manifest_path)?).map_err(|e| json_error(&manifest_path, e))?;
    let mut bugs: Vec<Bug> = Vec::with_capacity(manifest.bugs.len());
    let mut seen: HashMap<(String, u32), PathBuf> = HashMap::new();
    for rel in &manifest.bugs {
        let descriptor = root.join(rel);
        let bug = Bug::load(&root, &descriptor)?;
        let key = (bug.project().to_string(), bug.bug_id());
        if let Some(first) = seen.get(&key) {
            return Err(RegistryError::Conflict {
                project: key.0,
                bug_id: key.1,
                first: first.clone(),
                second: descriptor,
            });
        }
        seen.insert(key, descriptor);
        bugs.push(bug);
    }
    bugs.sort_by(|a, b| (a.project(), a.bug_id()).cmp(&(b.project(), b.bug_id())));
    Ok(Registry { root, bugs })
}

impl Registry {
    pub fn root(&self) -> &Path {
        &self.root
    }

    /// All bugs, ordered by project then id.
    pub fn bugs(&self) -> &[Bug] {
        &self.bugs
    }

    pub fn len(&self) -> usize {
        self.bugs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bugs.is_empty()
    }

    pub fn projects(&self) -> BTreeMap<&str, Vec<&Bug>> {
        let mut out: BTreeMap<&str, Vec<&Bug>> = BTreeMap::new();
        for bug in &self.bugs {
            out.entry(bug.project()).or_default().push(bug);
        }
        out
    }

    /// Case-sensitive lookup.
    pub fn get_bug(&self, project: &str, bug_id: u32) -> Result<&Bug, RegistryError> {
        if let Some(bug) = self.bugs.iter().find(|b| b.project() == project && b.bug_id() == bug_id) {
            return Ok(bug);
        }
        let ids: Vec<String> = self
            .bugs
            .iter()
            .filter(|b| b.project() == project)
            .map(|b| b.bug_id().to_string())
            .collect();
        let available = if ids.is_empty() {
            let projects: Vec<&str> = self.projects().into_keys().collect();
            format!("available projects: [{}]", projects.join(", "))
        } else {
            format!("available ids for {project}: [{}]", ids.join(", "))
        };
        Err(RegistryError::NotFound {
            project: project.to_string(),
            bug_id,
            available,
        })
    }

    pub fn get_project(&self, project: &str) -> Option<Vec<&Bug>> {
        self.projects().remove(project)
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// Human-readable listing: a header, then one line per project followed by
/// its bugs, ordered by project name and bug id.
pub fn summarize(registry: &Registry) -> String {
    let projects = registry.projects();
    let mut out = format!(
        "Benchmark: {}, {}\n",
        plural(projects.len(), "project"),
        plural(registry.len(), "bug")
    );
    for (name, bugs) in &projects {
        let _ = writeln!(out, "{name}: {}", plural(bugs.len(), "bug"));
        for bug in bugs {
            let _ = writeln!(out, "  {name} #{}  {}", bug.bug_id(), first_line(&bug.entry.description));
        }
    }
    out
}

fn first_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

/// Detailed description of one bug.
pub fn describe(bug: &Bug) -> String {
    let e = &bug.entry;
    let mut out = String::new();
    let _ = writeln!(out, "{} #{}", e.project, e.bug_id);
    let _ = writeln!(out, "  description:   {}", e.description);
    let _ = writeln!(out, "  labeling mode: {:?}", e.labeling_mode);
    let _ = writeln!(out, "  harness:       {}", e.harness_cmd.join(" "));
    if let Some(r) = &e.reference_cmd {
        let _ = writeln!(out, "  reference:     {}", r.join(" "));
    }
    let _ = writeln!(out, "  unit runner:   {}", e.unit_runner_cmd.join(" "));
    let _ = writeln!(out, "  timeout:       {} ms", e.timeout_ms);
    let failing = bug.curated.iter().filter(|t| t.label == Label::Failing).count();
    let _ = writeln!(
        out,
        "  curated tests: {} ({} FAILING, {} PASSING)",
        bug.curated.len(),
        failing,
        bug.curated.len() - failing
    );
    out
}
