//! Command-line front end: parses arguments and dispatches to `t4p_core`.
//!
//! Exit codes: 0 success, 1 FAILING/UNDEFINED results or label mismatches,
//! 2 usage errors, 3 environment or configuration failures.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ColorChoice, CommandFactory, Parser, Subcommand};
use t4p_core::execution::{
    checkout, read_marker, render_unit_tests, run_unit_suite, test_system_set, TestReport, TestSource, Variant, Workspace,
    COMPILE_LOG,
};
use t4p_core::fuzzing::{
    detokenize, generate_labeled_set, list_indexed_files, verify_labels, write_system_tests, Judge, LabeledTest,
};
use t4p_core::oracle::Label;
use t4p_core::registry::{describe, load_registry, summarize, Bug, LabelingMode, Registry};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENV: i32 = 3;

pub const BIN_NAME: &str = match option_env!("T4P_BIN_NAME") {
    Some(name) => name,
    None => "t4p",
};

pub const HOME_VAR: &str = "T4P_HOME";
pub const DEFAULT_SYSTEMTEST_DIR: &str = "t4p_systemtests";
pub const DEFAULT_UNITTEST_DIR: &str = "t4p_unittests";

const BUNDLED_REGISTRY: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures");

/// `$T4P_HOME` if set and non-empty, else the registry bundled with the
/// source tree.
pub fn registry_root() -> PathBuf {
    match std::env::var_os(HOME_VAR) {
        Some(home) if !home.is_empty() => PathBuf::from(home),
        _ => PathBuf::from(BUNDLED_REGISTRY),
    }
}

#[derive(Parser, Debug)]
#[command(name = BIN_NAME, version, about = "Benchmark of input-dependent bugs", color = ColorChoice::Never)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarize the benchmark, one project, or one bug
    Info {
        #[arg(short = 'p', long = "project")]
        project: Option<String>,
        #[arg(short = 'i', long = "bug-id", requires = "project")]
        bug_id: Option<u32>,
    },
    /// Materialize a bug's buggy (or fixed) source tree
    Checkout {
        #[arg(short = 'p', long = "project")]
        project: String,
        #[arg(short = 'i', long = "bug-id")]
        bug_id: u32,
        #[arg(long)]
        fixed: bool,
        /// Workspace directory [default: <project>_<bug-id>]
        #[arg(short = 'w', long = "workdir")]
        workdir: Option<PathBuf>,
    },
    /// Build the workspace in the current directory
    Compile,
    /// Generate or run system tests
    #[command(subcommand)]
    Systemtest(SystemtestCommand),
    /// Generate or run unit tests
    #[command(subcommand)]
    Unittest(UnittestCommand),
}

#[derive(Subcommand, Debug)]
enum SystemtestCommand {
    Generate {
        #[command(flatten)]
        gen: GenerateArgs,
        /// Re-run every generated test and check it against its label
        #[arg(long)]
        verify: bool,
    },
    Test(TestArgs),
}

#[derive(Subcommand, Debug)]
enum UnittestCommand {
    Generate {
        #[command(flatten)]
        gen: GenerateArgs,
    },
    Test(TestArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Number of tests
    #[arg(short = 'n')]
    n: usize,
    /// Fraction of FAILING tests
    #[arg(short = 'f', long = "failing-ratio", default_value_t = 0.5, value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(short = 'o', long = "out")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Directory of generated tests
    #[arg(short = 'd', long = "dir")]
    dir: Option<PathBuf>,
    /// Write the JSON report here
    #[arg(long)]
    report: Option<PathBuf>,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&r) {
        Ok(r)
    } else {
        Err(format!("{r} is outside [0, 1]"))
    }
}

/// An environment or configuration failure.
#[derive(Debug)]
struct Fail(String);

impl<E: std::error::Error> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

impl fmt::Display for Fail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

struct Ctx<'a> {
    cwd: &'a Path,
    registry_root: &'a Path,
    out: &'a mut dyn Write,
}

/// Runs one command. `argv[0]` is the program name; relative paths resolve
/// against `cwd`.
pub fn run_cli<I, S>(argv: I, cwd: &Path, registry_root: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let mut text = e.render().to_string();
            return if e.use_stderr() {
                if !text.contains("Usage:") {
                    text = format!("{text}\n{}\n", Cli::command().render_usage());
                }
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let mut ctx = Ctx { cwd, registry_root, out };
    match dispatch(&mut ctx, cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ENV
        }
    }
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<i32, Fail> {
    let registry = load_registry(ctx.registry_root)
        .map_err(|e| Fail(format!("{e} (registry root {}; set {HOME_VAR})", ctx.registry_root.display())))?;
    match command {
        Command::Info { project, bug_id } => info(ctx, &registry, project, bug_id),
        Command::Checkout {
            project,
            bug_id,
            fixed,
            workdir,
        } => {
            let bug = registry.get_bug(&project, bug_id)?;
            let variant = if fixed { Variant::Fixed } else { Variant::Buggy };
            let dest = ctx.cwd.join(workdir.unwrap_or_else(|| PathBuf::from(format!("{project}_{bug_id}"))));
            let ws = checkout(bug, variant, &dest)?;
            writeln!(ctx.out, "Checked out {project} #{bug_id} ({}) into {}", variant_name(variant), ws.root().display())?;
            Ok(EXIT_OK)
        }
        Command::Compile => {
            let mut ws = current_workspace(ctx, &registry)?;
            ws.compile()?;
            writeln!(
                ctx.out,
                "Compiled {}; log in {}",
                title(&ws),
                ws.root().join(COMPILE_LOG).display()
            )?;
            Ok(EXIT_OK)
        }
        Command::Systemtest(SystemtestCommand::Generate { gen, verify }) => {
            let ws = current_workspace(ctx, &registry)?;
            systemtest_generate(ctx, &ws, &gen, verify)
        }
        Command::Systemtest(SystemtestCommand::Test(args)) => {
            let ws = current_workspace(ctx, &registry)?;
            let dir = test_dir(ctx, &args, DEFAULT_SYSTEMTEST_DIR)?;
            let report = test_system_set(&ws, TestSource::Directory(dir), 1)?;
            finish_report(ctx, &report, &args)
        }
        Command::Unittest(UnittestCommand::Generate { gen }) => {
            let ws = current_workspace(ctx, &registry)?;
            let dir = ctx.cwd.join(gen.out.as_deref().unwrap_or(Path::new(DEFAULT_UNITTEST_DIR)));
            let paths = render_unit_tests(&ws, gen.n, gen.ratio, gen.seed, &dir)?;
            let failing = list_indexed_files(&dir, t4p_core::execution::UNIT_TEST_PREFIX)?
                .iter()
                .filter(|(_, label, _)| *label == Label::Failing)
                .count();
            writeln!(
                ctx.out,
                "Generated {} unit tests for {} ({failing} FAILING, {} PASSING) in {}",
                paths.len(),
                title(&ws),
                paths.len() - failing,
                dir.display()
            )?;
            Ok(EXIT_OK)
        }
        Command::Unittest(UnittestCommand::Test(args)) => {
            let ws = current_workspace(ctx, &registry)?;
            let dir = test_dir(ctx, &args, DEFAULT_UNITTEST_DIR)?;
            let report = run_unit_suite(&ws, &dir)?;
            finish_report(ctx, &report, &args)
        }
    }
}

fn info(ctx: &mut Ctx, registry: &Registry, project: Option<String>, bug_id: Option<u32>) -> Result<i32, Fail> {
    match (project, bug_id) {
        (None, _) => write!(ctx.out, "{}", summarize(registry))?,
        (Some(project), Some(id)) => write!(ctx.out, "{}", describe(registry.get_bug(&project, id)?))?,
        (Some(project), None) => {
            let bugs = registry.get_project(&project).ok_or_else(|| {
                let known: Vec<_> = registry.projects().into_keys().collect();
                Fail(format!("no project {project:?}; available: {}", known.join(", ")))
            })?;
            for (i, bug) in bugs.iter().enumerate() {
                if i > 0 {
                    writeln!(ctx.out)?;
                }
                write!(ctx.out, "{}", describe(bug))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn current_workspace(ctx: &Ctx, registry: &Registry) -> Result<Workspace, Fail> {
    let marker = read_marker(ctx.cwd)?;
    let bug: &Bug = registry.get_bug(&marker.project, marker.bug_id)?;
    Ok(Workspace::open(bug, ctx.cwd)?)
}

fn systemtest_generate(ctx: &mut Ctx, ws: &Workspace, gen: &GenerateArgs, verify: bool) -> Result<i32, Fail> {
    let bug = ws.bug();
    let judge = if verify || bug.entry().labeling_mode == LabelingMode::OracleFilter {
        Some(ws.labeling_judge()?)
    } else {
        None
    };
    let judge_ref = judge.as_ref().map(|j| j as &dyn Judge);
    let tests = generate_labeled_set(bug, gen.n, gen.ratio, gen.seed, judge_ref)?;
    let dir = ctx.cwd.join(gen.out.as_deref().unwrap_or(Path::new(DEFAULT_SYSTEMTEST_DIR)));
    write_system_tests(&dir, &tests)?;
    let failing = tests.iter().filter(|t| t.label == Label::Failing).count();
    writeln!(
        ctx.out,
        "Generated {} system tests for {} ({failing} FAILING, {} PASSING) in {}",
        tests.len(),
        title(ws),
        tests.len() - failing,
        dir.display()
    )?;
    let Some(judge) = judge_ref.filter(|_| verify) else {
        return Ok(EXIT_OK);
    };
    let records: Vec<_> = tests.iter().map(LabeledTest::record).collect();
    let report = verify_labels(bug, &records, judge)?;
    for e in report.mismatches() {
        writeln!(
            ctx.out,
            "  mismatch: {} labeled {}, observed {}",
            detokenize(&e.tokens),
            e.expected,
            e.observed
        )?;
    }
    writeln!(ctx.out, "Verified {} of {} labels", report.matched(), report.entries.len())?;
    Ok(if report.all_match { EXIT_OK } else { EXIT_FAILURES })
}

fn test_dir(ctx: &Ctx, args: &TestArgs, default: &str) -> Result<PathBuf, Fail> {
    let dir = ctx.cwd.join(args.dir.as_deref().unwrap_or(Path::new(default)));
    if !dir.is_dir() {
        return Err(Fail(format!("{}: no such test directory (generate tests first)", dir.display())));
    }
    Ok(dir)
}

fn finish_report(ctx: &mut Ctx, report: &TestReport, args: &TestArgs) -> Result<i32, Fail> {
    for (i, e) in report.entries.iter().enumerate() {
        let name = e.name.clone().unwrap_or_else(|| format!("#{i}"));
        write!(ctx.out, "{:<9} {name}  {}", e.result.to_string(), detokenize(&e.tokens))?;
        if let (Some(false), Some(expected)) = (e.matches, e.expected) {
            write!(ctx.out, "  (expected {expected})")?;
        }
        if let Some(error) = &e.error {
            write!(ctx.out, "  [{error}]")?;
        }
        writeln!(ctx.out)?;
    }
    let t = report.totals;
    writeln!(
        ctx.out,
        "{}: {} PASSING, {} FAILING, {} UNDEFINED ({} tests)",
        report_title(report),
        t.passing,
        t.failing,
        t.undefined,
        t.total()
    )?;
    if let Some(path) = &args.report {
        let path = ctx.cwd.join(path);
        report.write(&path)?;
        writeln!(ctx.out, "Report written to {}", path.display())?;
    }
    Ok(if report.has_failures() { EXIT_FAILURES } else { EXIT_OK })
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Buggy => "BUGGY",
        Variant::Fixed => "FIXED",
    }
}

fn title(ws: &Workspace) -> String {
    format!("{} #{} ({})", ws.bug().project(), ws.bug().bug_id(), variant_name(ws.variant()))
}

fn report_title(r: &TestReport) -> String {
    format!("{} #{} ({})", r.project, r.bug_id, variant_name(r.variant))
}
