//! Unit tests rendered from a per-bug template and run by the bug's
//! declared runner, which reports results as an XML test report.
//!
//! Templates may use exactly these placeholders: `{{case_name}}`,
//! `{{argv_json}}`, `{{expected_stdout_json}}` and `{{label}}`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use tempfile::TempDir;

use super::junit::{parse_junit, CaseOutcome};
use super::{io_err, run_process, ExecError, ReportEntry, TestReport, Workspace};
use crate::fuzzing::{generate_labeled_set_with, list_indexed_files, parse_indexed_name, remove_indexed_files, GenLimits, SIDECAR_FILE};
use crate::oracle::{Label, TestResult};
use crate::registry::{write_curated, TestCaseRecord};

pub const UNIT_TEST_PREFIX: &str = "test_t4p_";
const PLACEHOLDERS: [&str; 4] = ["case_name", "argv_json", "expected_stdout_json", "label"];

/// File extension for rendered tests: the template's name with a trailing
/// `.tmpl`, `.template` or `.in` removed, e.g. `unit.py.tmpl` gives `py`.
pub fn template_extension(template: &Path) -> String {
    let name = template.file_name().and_then(|n| n.to_str()).unwrap_or("");
    let base = [".tmpl", ".template", ".in"]
        .iter()
        .find_map(|suffix| name.strip_suffix(suffix))
        .unwrap_or(name);
    Path::new(base)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("txt")
        .to_string()
}

/// Substitutes `{{name}}` placeholders. Braces around anything that is not
/// an identifier are left alone; an unknown identifier is an error.
pub fn render_template(template: &str, values: &HashMap<&str, String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}");
        let name = close.map(|c| after[..c].trim());
        match (close, name) {
            (Some(c), Some(name)) if !name.is_empty() && name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') => {
                if !PLACEHOLDERS.contains(&name) {
                    return Err(format!("unknown placeholder {{{{{name}}}}}"));
                }
                let value = values.get(name).ok_or_else(|| format!("no value for {{{{{name}}}}}"))?;
                out.push_str(value);
                rest = &after[c + 2..];
            }
            _ => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Generates `n` labeled inputs, computes each expected output with the
/// reference command, and renders one test file per case into `dest`.
///
/// Candidates whose reference run times out are discarded and count toward
/// the attempt budget. A `tests.jsonl` sidecar records the tokens of every
/// case in index order.
pub fn render_unit_tests(ws: &Workspace, n: usize, failing_ratio: f64, seed: u64, dest: &Path) -> Result<Vec<PathBuf>, ExecError> {
    let bug = ws.bug();
    if bug.entry().reference_cmd.is_none() {
        return Err(ExecError::Config(format!(
            "{} #{} has no reference_cmd to compute expected outputs",
            bug.project(),
            bug.bug_id()
        )));
    }
    let template_path = bug.resolve(&bug.entry().unit_template_file);
    let template = fs::read_to_string(&template_path).map_err(io_err(&template_path))?;
    let probe: HashMap<&str, String> = PLACEHOLDERS.iter().map(|p| (*p, String::new())).collect();
    render_template(&template, &probe).map_err(|message| ExecError::Template {
        path: template_path.clone(),
        message,
    })?;
    let ext = template_extension(&template_path);

    let judge = match bug.entry().labeling_mode {
        crate::registry::LabelingMode::OracleFilter => Some(ws.labeling_judge()?),
        crate::registry::LabelingMode::Grammar => None,
    };
    let mut expected: Vec<String> = Vec::with_capacity(n);
    let tests = generate_labeled_set_with(
        bug,
        n,
        failing_ratio,
        seed,
        judge.as_ref().map(|j| j as &dyn crate::fuzzing::Judge),
        &GenLimits::for_count(n),
        &mut |candidate| match ws.run_reference(&candidate.tokens)? {
            Some(reference) => {
                expected.push(reference.stdout);
                Ok(true)
            }
            None => Ok(false),
        },
    )?;

    fs::create_dir_all(dest).map_err(io_err(dest))?;
    remove_indexed_files(dest, UNIT_TEST_PREFIX).map_err(io_err(dest))?;
    let mut paths = Vec::with_capacity(tests.len());
    for (index, (test, stdout)) in tests.iter().zip(&expected).enumerate() {
        let case_name = format!("{UNIT_TEST_PREFIX}{index}_{}", test.label.file_tag());
        let values: HashMap<&str, String> = HashMap::from([
            ("case_name", case_name.clone()),
            ("argv_json", serde_json::to_string(&test.tokens).expect("strings serialize")),
            ("expected_stdout_json", serde_json::to_string(stdout).expect("strings serialize")),
            ("label", test.label.to_string()),
        ]);
        let text = render_template(&template, &values).map_err(|message| ExecError::Template {
            path: template_path.clone(),
            message,
        })?;
        let path = dest.join(format!("{case_name}.{ext}"));
        fs::write(&path, text).map_err(io_err(&path))?;
        paths.push(path);
    }
    let records: Vec<TestCaseRecord> = tests.iter().map(|t| t.record()).collect();
    let sidecar = dest.join(SIDECAR_FILE);
    fs::write(&sidecar, write_curated(&records)).map_err(io_err(&sidecar))?;
    Ok(paths)
}

fn read_sidecar(dir: &Path) -> Vec<Vec<String>> {
    let Ok(text) = fs::read_to_string(dir.join(SIDECAR_FILE)) else {
        return Vec::new();
    };
    text.lines()
        .filter_map(|l| serde_json::from_str::<TestCaseRecord>(l).ok())
        .map(|r| r.tokens)
        .collect()
}

/// Runs the unit tests in `tests_path` with the bug's `unit_runner_cmd`
/// (the directory is appended as the last argument) and reads the XML
/// result file the runner writes to `$T4P_REPORT`.
///
/// Results map pass to PASSING, failure to FAILING and error or skip to
/// UNDEFINED. Case names of the form `test_t4p_<index>_<label>` supply the
/// expected label.
pub fn run_unit_suite(ws: &Workspace, tests_path: &Path) -> Result<TestReport, ExecError> {
    ws.require_compiled()?;
    let files = list_indexed_files(tests_path, UNIT_TEST_PREFIX).map_err(io_err(tests_path))?;
    if files.is_empty() {
        return Ok(TestReport::new(ws, Vec::new()));
    }
    let tests_path = tests_path.canonicalize().map_err(io_err(tests_path))?;
    let scratch = TempDir::new().map_err(io_err(Path::new("<tempdir>")))?;
    let report_path = scratch.path().join("t4p_unit_report.xml");

    let mut argv = ws.expand(&ws.bug().entry().unit_runner_cmd, ws.root());
    argv.push(tests_path.display().to_string());
    let mut env = ws.env_for(ws.root());
    env.insert("T4P_REPORT".into(), report_path.display().to_string());
    env.insert("T4P_TESTS".into(), tests_path.display().to_string());
    let timeout = Duration::from_millis(ws.bug().entry().timeout_ms.saturating_mul(files.len() as u64 + 1));
    let outcome = run_process(&argv, ws.root(), &env, timeout)?;

    let xml = fs::read_to_string(&report_path).map_err(|e| ExecError::UnitReport {
        path: report_path.clone(),
        message: format!(
            "runner did not write a result file ({e}); exit {:?}{}; stderr: {}",
            outcome.exit_code,
            if outcome.timed_out { " after timeout" } else { "" },
            outcome.stderr.trim()
        ),
    })?;
    let cases = parse_junit(&xml).map_err(|e| ExecError::UnitReport {
        path: report_path.clone(),
        message: e.to_string(),
    })?;

    let tokens_by_index = read_sidecar(&tests_path);
    let mut keyed: Vec<(Option<usize>, ReportEntry)> = cases
        .into_iter()
        .map(|case| {
            let parsed = case
                .name
                .find(UNIT_TEST_PREFIX)
                .and_then(|at| parse_indexed_name(&case.name[at..], UNIT_TEST_PREFIX));
            let result = match case.outcome {
                CaseOutcome::Passed => TestResult::Passing,
                CaseOutcome::Failed => TestResult::Failing,
                CaseOutcome::Errored | CaseOutcome::Skipped => TestResult::Undefined,
            };
            let index = parsed.map(|(i, _)| i);
            let expected: Option<Label> = parsed.map(|(_, l)| l);
            let tokens = index.and_then(|i| tokens_by_index.get(i).cloned()).unwrap_or_default();
            let duration_ms = case.time_secs.map_or(0, |s| (s * 1000.0).round().max(0.0) as u64);
            let mut entry = ReportEntry::new(tokens, result, expected, duration_ms);
            entry.name = Some(case.name);
            (index, entry)
        })
        .collect();
    keyed.sort_by_key(|(index, _)| index.unwrap_or(usize::MAX));
    Ok(TestReport::new(ws, keyed.into_iter().map(|(_, e)| e).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_from_template_name() {
        assert_eq!(template_extension(Path::new("t/unit.py.tmpl")), "py");
        assert_eq!(template_extension(Path::new("unit_test.sh")), "sh");
        assert_eq!(template_extension(Path::new("case.rs.template")), "rs");
        assert_eq!(template_extension(Path::new("bare")), "txt");
    }

    #[test]
    fn renders_known_placeholders() {
        let values = HashMap::from([
            ("case_name", "test_t4p_0_failing".to_string()),
            ("argv_json", r#"["2","1","3"]"#.to_string()),
            ("expected_stdout_json", r#""2\n""#.to_string()),
            ("label", "FAILING".to_string()),
        ]);
        let out = render_template("def {{case_name}}():\n    check({{ argv_json }}, {{expected_stdout_json}})  # {{label}} {x: {}}", &values).unwrap();
        assert_eq!(
            out,
            "def test_t4p_0_failing():\n    check([\"2\",\"1\",\"3\"], \"2\\n\")  # FAILING {x: {}}"
        );
    }

    #[test]
    fn unknown_placeholder_is_an_error() {
        let err = render_template("{{case_name}} {{nope}}", &HashMap::from([("case_name", String::new())])).unwrap_err();
        assert!(err.contains("nope"));
        // non-identifier contents are literal text
        assert_eq!(render_template("{{ a b }} {{", &HashMap::new()).unwrap(), "{{ a b }} {{");
    }
}
