//! Workspace lifecycle and test execution: checkout of the buggy or fixed
//! variant, compilation, running system tests through the harness, reports,
//! and the unit-test pipeline.
//!
//! Command vectors from a bug descriptor may mention `${T4P_ROOT}` (the
//! registry root) and `${T4P_WORKSPACE}` (the directory the command runs
//! in); both are substituted before execution and also exported as
//! environment variables.

pub mod junit;
pub mod patch;
mod process;
mod report;
mod unit;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use walkdir::WalkDir;

pub use process::{run_process, ProcessOutcome};
pub use report::{test_system_set, ReportEntry, TestReport, TestSource, Totals};
pub use unit::{render_template, render_unit_tests, run_unit_suite, template_extension, UNIT_TEST_PREFIX};

use crate::fuzzing::{GenerationError, Judge, Judgement};
use crate::grammar::FeatureMap;
use crate::oracle::{evaluate, OracleError, ReferenceOutput, RunObservation, TestResult};
use crate::registry::Bug;
use patch::PatchError;

pub const MARKER_FILE: &str = ".t4p";
pub const COMPILE_LOG: &str = "t4p_compile.log";
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;
const COMPILE_TIMEOUT: Duration = Duration::from_secs(600);

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("cannot run {program}: {source}")]
    Spawn { program: String, source: io::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Config(String),
    #[error("{}: not a t4p workspace ({message})", path.display())]
    Marker { path: PathBuf, message: String },
    #[error("{}: destination is not empty and is not a workspace of this bug", .0.display())]
    DestNotEmpty(PathBuf),
    #[error("patch failed: {0}")]
    Patch(#[from] PatchError),
    #[error("compile command #{index} ({command}) exited with {}; see {}", exit_code.map_or("a timeout or signal".to_string(), |c| format!("code {c}")), log.display())]
    Compile {
        index: usize,
        command: String,
        exit_code: Option<i32>,
        log: PathBuf,
    },
    #[error("{}: workspace is not compiled (run compile first)", .0.display())]
    NotCompiled(PathBuf),
    #[error("template {}: {message}", path.display())]
    Template { path: PathBuf, message: String },
    #[error("unit report {}: {message}", path.display())]
    UnitReport { path: PathBuf, message: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Generation(Box<GenerationError>),
}

impl From<GenerationError> for ExecError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::Execution(inner) => inner,
            other => ExecError::Generation(Box::new(other)),
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExecError + '_ {
    move |source| ExecError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Variant {
    Buggy,
    Fixed,
}

/// Contents of the `.t4p` marker file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub project: String,
    pub bug_id: u32,
    pub variant: Variant,
    #[serde(default)]
    pub compiled: bool,
}

pub fn read_marker(dir: &Path) -> Result<Marker, ExecError> {
    let path = dir.join(MARKER_FILE);
    let text = fs::read_to_string(&path).map_err(|e| ExecError::Marker {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ExecError::Marker {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_marker(dir: &Path, marker: &Marker) -> Result<(), ExecError> {
    let path = dir.join(MARKER_FILE);
    let text = serde_json::to_string_pretty(marker).expect("marker always serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

/// A checked-out variant of one bug.
#[derive(Debug, Clone)]
pub struct Workspace {
    bug: Bug,
    variant: Variant,
    root: PathBuf,
    compiled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompileStatus {
    pub commands_run: usize,
    pub log: PathBuf,
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), ExecError> {
    for entry in WalkDir::new(from).min_depth(1).sort_by_file_name() {
        let entry = entry.map_err(|e| ExecError::Io {
            path: from.to_path_buf(),
            source: e.into(),
        })?;
        let rel = entry.path().strip_prefix(from).expect("walk stays under its root");
        let dest = to.join(rel);
        if entry.file_type().is_dir() {
            fs::create_dir_all(&dest).map_err(io_err(&dest))?;
        } else {
            fs::copy(entry.path(), &dest).map_err(io_err(&dest))?;
        }
    }
    Ok(())
}

fn clear_dir(dir: &Path) -> Result<(), ExecError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() && !path.is_symlink() {
            fs::remove_dir_all(&path).map_err(io_err(&path))?;
        } else {
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

/// Relative paths (with `/` separators) of everything under `root`.
fn snapshot(root: &Path) -> BTreeSet<String> {
    WalkDir::new(root)
        .min_depth(1)
        .into_iter()
        .filter_map(Result::ok)
        .filter_map(|e| {
            let rel = e.path().strip_prefix(root).ok()?;
            Some(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"))
        })
        .collect()
}

/// Materializes `variant` of `bug` in `dest`.
///
/// `dest` must be absent, empty, or a workspace of the same bug (whose
/// contents are then replaced). FIXED applies the bug's patch on top of the
/// buggy tree; if the patch fails, no marker is written.
pub fn checkout(bug: &Bug, variant: Variant, dest: &Path) -> Result<Workspace, ExecError> {
    if dest.exists() {
        let non_empty = fs::read_dir(dest).map_err(io_err(dest))?.next().is_some();
        if non_empty {
            match read_marker(dest) {
                Ok(m) if m.project == bug.project() && m.bug_id == bug.bug_id() => clear_dir(dest)?,
                _ => return Err(ExecError::DestNotEmpty(dest.to_path_buf())),
            }
        }
    } else {
        fs::create_dir_all(dest).map_err(io_err(dest))?;
    }
    let root = dest.canonicalize().map_err(io_err(dest))?;
    copy_tree(&bug.resolve(&bug.entry().source_dir), &root)?;
    if variant == Variant::Fixed {
        let patch_path = bug.resolve(&bug.entry().patch_file);
        let text = fs::read_to_string(&patch_path).map_err(io_err(&patch_path))?;
        let parsed = patch::parse_patch(&text)?;
        patch::apply_patch_to_dir(&parsed, &root)?;
    }
    let ws = Workspace {
        bug: bug.clone(),
        variant,
        root,
        compiled: false,
    };
    ws.save_marker()?;
    Ok(ws)
}

impl Workspace {
    /// Re-opens an existing workspace; the marker must name `bug`.
    pub fn open(bug: &Bug, dir: &Path) -> Result<Workspace, ExecError> {
        let marker = read_marker(dir)?;
        if marker.project != bug.project() || marker.bug_id != bug.bug_id() {
            return Err(ExecError::Marker {
                path: dir.to_path_buf(),
                message: format!("marker names {} #{}", marker.project, marker.bug_id),
            });
        }
        Ok(Workspace {
            bug: bug.clone(),
            variant: marker.variant,
            root: dir.canonicalize().map_err(io_err(dir))?,
            compiled: marker.compiled,
        })
    }

    pub fn bug(&self) -> &Bug {
        &self.bug
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn is_compiled(&self) -> bool {
        self.compiled
    }

    fn save_marker(&self) -> Result<(), ExecError> {
        write_marker(
            &self.root,
            &Marker {
                project: self.bug.project().to_string(),
                bug_id: self.bug.bug_id(),
                variant: self.variant,
                compiled: self.compiled,
            },
        )
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.bug.entry().timeout_ms)
    }

    /// Bug environment plus the `T4P_*` variables for a command run in `cwd`.
    fn env_for(&self, cwd: &Path) -> BTreeMap<String, String> {
        let mut env = self.bug.entry().env.clone();
        env.insert("T4P_ROOT".into(), self.bug.root().display().to_string());
        env.insert("T4P_WORKSPACE".into(), cwd.display().to_string());
        env
    }

    fn expand(&self, argv: &[String], cwd: &Path) -> Vec<String> {
        let root = self.bug.root().display().to_string();
        let ws = cwd.display().to_string();
        argv.iter()
            .map(|a| a.replace("${T4P_ROOT}", &root).replace("${T4P_WORKSPACE}", &ws))
            .collect()
    }

    /// Runs the bug's compile commands in order, logging every command's
    /// output to `t4p_compile.log`.
    pub fn compile(&mut self) -> Result<CompileStatus, ExecError> {
        use std::fmt::Write as _;
        let log_path = self.root.join(COMPILE_LOG);
        let mut log = String::new();
        let cmds = self.bug.entry().compile_cmds.clone();
        for (index, cmd) in cmds.iter().enumerate() {
            let argv = self.expand(cmd, &self.root);
            let outcome = run_process(&argv, &self.root, &self.env_for(&self.root), COMPILE_TIMEOUT);
            let _ = writeln!(log, "$ {}", argv.join(" "));
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) => {
                    let _ = writeln!(log, "{e}");
                    fs::write(&log_path, &log).map_err(io_err(&log_path))?;
                    return Err(e);
                }
            };
            let _ = write!(log, "{}{}", outcome.stdout, outcome.stderr);
            let _ = writeln!(log, "[exit {:?}, {} ms]", outcome.exit_code, outcome.duration_ms);
            if outcome.exit_code != Some(0) {
                fs::write(&log_path, &log).map_err(io_err(&log_path))?;
                self.compiled = false;
                self.save_marker()?;
                return Err(ExecError::Compile {
                    index,
                    command: argv.join(" "),
                    exit_code: outcome.exit_code,
                    log: log_path,
                });
            }
        }
        fs::write(&log_path, &log).map_err(io_err(&log_path))?;
        self.compiled = true;
        self.save_marker()?;
        Ok(CompileStatus {
            commands_run: cmds.len(),
            log: log_path,
        })
    }

    fn require_compiled(&self) -> Result<(), ExecError> {
        if self.compiled {
            Ok(())
        } else {
            Err(ExecError::NotCompiled(self.root.clone()))
        }
    }

    /// Runs `harness_cmd ++ tokens` in the workspace root and captures the
    /// observation. Files the run creates are reported and then removed, so
    /// consecutive runs see the same tree.
    pub fn run_system_test(&self, tokens: &[String]) -> Result<RunObservation, ExecError> {
        self.require_compiled()?;
        self.run_in(&self.root, tokens)
    }

    fn run_in(&self, dir: &Path, tokens: &[String]) -> Result<RunObservation, ExecError> {
        let mut argv = self.expand(&self.bug.entry().harness_cmd, dir);
        argv.extend(tokens.iter().cloned());
        let before = snapshot(dir);
        let outcome = run_process(&argv, dir, &self.env_for(dir), self.timeout())?;
        let created: Vec<String> = snapshot(dir).difference(&before).cloned().collect();
        for rel in created.iter().rev() {
            let path = dir.join(rel);
            if path.is_dir() {
                let _ = fs::remove_dir_all(&path);
            } else {
                let _ = fs::remove_file(&path);
            }
        }
        Ok(RunObservation {
            exit_code: outcome.exit_code,
            stdout: outcome.stdout,
            stderr: outcome.stderr,
            duration_ms: outcome.duration_ms,
            timed_out: outcome.timed_out,
            created_files: created,
            tokens: tokens.to_vec(),
        })
    }

    /// Runs the bug's reference command on `tokens` in a private scratch
    /// directory. Returns `None` if it timed out.
    pub fn run_reference(&self, tokens: &[String]) -> Result<Option<ReferenceOutput>, ExecError> {
        let cmd = self
            .bug
            .entry()
            .reference_cmd
            .as_ref()
            .ok_or_else(|| ExecError::Config(format!("{} #{} has no reference_cmd", self.bug.project(), self.bug.bug_id())))?;
        let scratch = TempDir::new().map_err(io_err(Path::new("<tempdir>")))?;
        let mut argv = self.expand(cmd, scratch.path());
        argv.extend(tokens.iter().cloned());
        let outcome = run_process(&argv, scratch.path(), &self.env_for(scratch.path()), self.timeout())?;
        if outcome.timed_out {
            return Ok(None);
        }
        Ok(Some(ReferenceOutput {
            exit_code: outcome.exit_code,
            stdout: outcome.stdout,
            stderr: outcome.stderr,
        }))
    }

    /// Runs one system test in `dir` and applies the oracle.
    fn classify_in(&self, dir: &Path, tokens: &[String], feats: &FeatureMap) -> Result<(RunObservation, TestResult), ExecError> {
        let obs = self.run_in(dir, tokens)?;
        let result = if self.bug.oracle().uses_reference() && !obs.timed_out {
            match self.run_reference(tokens)? {
                Some(reference) => evaluate(self.bug.oracle(), &obs, feats, Some(&reference))?,
                None => TestResult::Undefined,
            }
        } else if obs.timed_out {
            TestResult::Undefined
        } else {
            evaluate(self.bug.oracle(), &obs, feats, None)?
        };
        Ok((obs, result))
    }

    pub fn classify(&self, tokens: &[String], feats: &FeatureMap) -> Result<(RunObservation, TestResult), ExecError> {
        self.require_compiled()?;
        self.classify_in(&self.root, tokens, feats)
    }

    /// A judge backed by a compiled BUGGY build: this workspace if it is
    /// one, otherwise a temporary buggy checkout.
    pub fn labeling_judge(&self) -> Result<LabelingJudge<'_>, ExecError> {
        if self.variant == Variant::Buggy {
            self.require_compiled()?;
            return Ok(LabelingJudge::Borrowed(self));
        }
        let scratch = TempDir::new().map_err(io_err(Path::new("<tempdir>")))?;
        let mut ws = checkout(&self.bug, Variant::Buggy, scratch.path())?;
        ws.compile()?;
        Ok(LabelingJudge::Owned(scratch, Box::new(ws)))
    }
}

impl Judge for Workspace {
    fn judge(&self, tokens: &[String], features: &FeatureMap) -> Result<Judgement, ExecError> {
        let (obs, result) = self.classify(tokens, features)?;
        Ok(Judgement {
            result,
            duration_ms: obs.duration_ms,
        })
    }
}

pub enum LabelingJudge<'a> {
    Borrowed(&'a Workspace),
    Owned(TempDir, Box<Workspace>),
}

impl LabelingJudge<'_> {
    pub fn workspace(&self) -> &Workspace {
        match self {
            LabelingJudge::Borrowed(ws) => ws,
            LabelingJudge::Owned(_, ws) => ws,
        }
    }
}

impl Judge for LabelingJudge<'_> {
    fn judge(&self, tokens: &[String], features: &FeatureMap) -> Result<Judgement, ExecError> {
        self.workspace().judge(tokens, features)
    }
}
