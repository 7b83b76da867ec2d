//! Stub registries for integration tests: tiny sh programs with seeded
//! faults, built in a temporary directory.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use t4p_core::registry::{load_registry, Bug, Registry};
use tempfile::TempDir;

pub const MIDDLE_BUGGY: &str = r#"x=$1 y=$2 z=$3
if [ "$y" -lt "$z" ]; then
    if [ "$x" -lt "$y" ]; then echo "$y"; exit 0
    elif [ "$x" -lt "$z" ]; then echo "$y"; exit 0
    fi
else
    if [ "$x" -gt "$y" ]; then echo "$y"; exit 0
    elif [ "$x" -gt "$z" ]; then echo "$x"; exit 0
    fi
fi
echo "$z"
"#;

pub const MIDDLE_PATCH: &str = r#"--- a/prog.sh
+++ b/prog.sh
@@ -3,3 +3,3 @@
     if [ "$x" -lt "$y" ]; then echo "$y"; exit 0
-    elif [ "$x" -lt "$z" ]; then echo "$y"; exit 0
+    elif [ "$x" -lt "$z" ]; then echo "$x"; exit 0
     fi
"#;

pub const MIDDLE_REFERENCE: &str = "printf '%s\\n' \"$1\" \"$2\" \"$3\" | sort -n | sed -n 2p\n";

pub const MIDDLE_GRAMMAR: &str = r#"<start> ::= <int> " " <int> " " <int>
<int> ::= "1" | "2" | "3" | "4" | "5"
"#;

/// Every `y < x < z` ordering over 1..=5: exactly the inputs the fault hits.
pub const MIDDLE_FAILING: [[&str; 3]; 10] = [
    ["2", "1", "3"],
    ["2", "1", "4"],
    ["2", "1", "5"],
    ["3", "1", "4"],
    ["3", "1", "5"],
    ["4", "1", "5"],
    ["3", "2", "4"],
    ["3", "2", "5"],
    ["4", "2", "5"],
    ["4", "3", "5"],
];

pub const MIDDLE_PASSING: [[&str; 3]; 10] = [
    ["1", "2", "3"],
    ["3", "2", "1"],
    ["1", "1", "1"],
    ["2", "2", "5"],
    ["5", "5", "1"],
    ["1", "3", "2"],
    ["5", "4", "3"],
    ["2", "3", "1"],
    ["3", "3", "4"],
    ["1", "5", "4"],
];

fn middle_failing_grammar() -> String {
    let alts: Vec<String> = MIDDLE_FAILING.iter().map(|t| format!("\"{}\"", t.join(" "))).collect();
    format!("<start> ::= {}\n", alts.join(" | "))
}

const MIDDLE_PASSING_GRAMMAR: &str = r#"<start> ::= "1 1 " <int> | "2 2 " <int> | "3 3 " <int> | "4 4 " <int> | "5 5 " <int> | <desc>
<desc> ::= "3 2 1" | "5 4 3" | "4 2 1"
<int> ::= "1" | "2" | "3" | "4" | "5"
"#;

pub const TALLY_BUGGY: &str = r#"case "$1" in
    --sleep) sleep 5; echo late; exit 0 ;;
    --touch) echo hi > out.txt; mkdir -p made/deeper; echo touched; exit 0 ;;
    --usage) echo "usage: tally WORD..." >&2; exit 2 ;;
esac
for w in "$@"; do
    if [ "$w" = b ]; then echo boom >&2; exit 1; fi
done
echo "$#"
"#;

pub const TALLY_PATCH: &str = r#"--- a/prog.sh
+++ b/prog.sh
@@ -6,4 +6,4 @@
 for w in "$@"; do
-    if [ "$w" = b ]; then echo boom >&2; exit 1; fi
+    :
 done
 echo "$#"
"#;

pub const TALLY_GRAMMAR: &str = r#"<start> ::= <w> | <w> " " <start>
<w> ::= "a" | "b" | "c"
"#;

pub const UNIT_TEMPLATE: &str = r#"# {{case_name}} expects a {{label}} outcome on the buggy build
ARGV = {{argv_json}}
EXPECTED = {{expected_stdout_json}}
"#;

/// Runs every `test_t4p_*` file: the program's stdout must equal EXPECTED.
pub const UNIT_RUNNER: &str = r#"import os, subprocess, sys, time
from xml.sax.saxutils import quoteattr, escape
tests_dir = sys.argv[1]
ws = os.environ["T4P_WORKSPACE"]
cases = []
for name in sorted(os.listdir(tests_dir)):
    if not name.startswith("test_t4p_"):
        continue
    scope = {}
    with open(os.path.join(tests_dir, name)) as f:
        exec(f.read(), scope)
    start = time.time()
    try:
        out = subprocess.run(["sh", "built.sh"] + scope["ARGV"], cwd=ws, capture_output=True, text=True, timeout=5).stdout
        body = "" if out == scope["EXPECTED"] else "<failure message=%s/>" % quoteattr("got %r" % out)
    except Exception as e:
        body = "<error message=%s/>" % quoteattr(str(e))
    cases.append('<testcase classname="stub" name="%s" time="%.3f">%s</testcase>' % (name.split(".")[0], time.time() - start, body))
with open(os.environ["T4P_REPORT"], "w") as f:
    f.write('<?xml version="1.0"?><testsuite name="stub" tests="%d">%s</testsuite>' % (len(cases), "".join(cases)))
"#;

pub fn write(root: &Path, rel: &str, text: &str) {
    let path = root.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn curated_lines(failing: &[[&str; 3]], passing: &[[&str; 3]]) -> String {
    let mut out = String::new();
    for (label, set) in [("FAILING", failing), ("PASSING", passing)] {
        for t in set {
            out.push_str(&json!({"tokens": t, "label": label}).to_string());
            out.push('\n');
        }
    }
    out
}

pub fn middle_descriptor(project: &str, bug_id: u32, dir: &str) -> serde_json::Value {
    json!({
        "project": project,
        "bug_id": bug_id,
        "description": "middle of three returns y when x lies between y and z\nsecond line",
        "source_dir": format!("{dir}/src"),
        "patch_file": format!("{dir}/fix.patch"),
        "compile_cmds": [["sh", "-c", "cp prog.sh built.sh"]],
        "harness_cmd": ["sh", "built.sh"],
        "unit_runner_cmd": ["python3", "${T4P_ROOT}/runner.py"],
        "grammar_file": format!("{dir}/input.bnf"),
        "failing_grammar_file": format!("{dir}/failing.bnf"),
        "passing_grammar_file": format!("{dir}/passing.bnf"),
        "labeling_mode": "GRAMMAR",
        "oracle_file": format!("{dir}/oracle.json"),
        "reference_cmd": ["sh", "${T4P_ROOT}/ref/middle.sh"],
        "curated_tests_file": format!("{dir}/curated.jsonl"),
        "unit_template_file": format!("{dir}/test_t4p.py.tmpl"),
        "timeout_ms": 5000
    })
}

pub fn tally_descriptor() -> serde_json::Value {
    json!({
        "project": "tally",
        "bug_id": 1,
        "description": "any word b crashes the counter",
        "source_dir": "tally/src",
        "patch_file": "tally/fix.patch",
        "compile_cmds": [["sh", "-c", "cp prog.sh built.sh"], ["test", "-f", "built.sh"]],
        "harness_cmd": ["sh", "${T4P_WORKSPACE}/built.sh"],
        "unit_runner_cmd": ["python3", "${T4P_ROOT}/runner.py"],
        "grammar_file": "tally/input.bnf",
        "labeling_mode": "ORACLE_FILTER",
        "oracle_file": "tally/oracle.json",
        "curated_tests_file": "tally/curated.jsonl",
        "unit_template_file": "tally/test_t4p.py.tmpl",
        "timeout_ms": 400,
        "env": {"TALLY_MODE": "stub"}
    })
}

fn write_middle_files(root: &Path, dir: &str) {
    write(root, &format!("{dir}/src/prog.sh"), MIDDLE_BUGGY);
    write(root, &format!("{dir}/fix.patch"), MIDDLE_PATCH);
    write(root, &format!("{dir}/input.bnf"), MIDDLE_GRAMMAR);
    write(root, &format!("{dir}/failing.bnf"), &middle_failing_grammar());
    write(root, &format!("{dir}/passing.bnf"), MIDDLE_PASSING_GRAMMAR);
    write(
        root,
        &format!("{dir}/oracle.json"),
        r#"{"undefined_when": {"exit_code": {"neq": 0}}, "failing_when": {"ref_differs": "stdout"}}"#,
    );
    write(root, &format!("{dir}/curated.jsonl"), &curated_lines(&MIDDLE_FAILING, &MIDDLE_PASSING));
    write(root, &format!("{dir}/test_t4p.py.tmpl"), UNIT_TEMPLATE);
}

/// A registry with `middle #1` (GRAMMAR mode, reference oracle) and
/// `tally #1` (ORACLE_FILTER mode, crash oracle).
pub struct Stub {
    pub dir: TempDir,
}

impl Stub {
    pub fn new() -> Stub {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write(root, "ref/middle.sh", MIDDLE_REFERENCE);
        write(root, "runner.py", UNIT_RUNNER);
        write_middle_files(root, "middle");
        write(root, "middle/bug1.json", &middle_descriptor("middle", 1, "middle").to_string());

        write(root, "tally/src/prog.sh", TALLY_BUGGY);
        write(root, "tally/fix.patch", TALLY_PATCH);
        write(root, "tally/input.bnf", TALLY_GRAMMAR);
        write(
            root,
            "tally/oracle.json",
            r#"{"undefined_when": {"exit_code": {"eq": 2}}, "failing_when": {"stderr_contains": "boom"}}"#,
        );
        write(
            root,
            "tally/curated.jsonl",
            &[
                r#"{"tokens": ["b"], "label": "FAILING"}"#,
                r#"{"tokens": ["a", "b", "c"], "label": "FAILING"}"#,
                r#"{"tokens": ["a"], "label": "PASSING"}"#,
                r#"{"tokens": ["c", "a"], "label": "PASSING"}"#,
                "",
            ]
            .join("\n"),
        );
        write(root, "tally/test_t4p.py.tmpl", UNIT_TEMPLATE);
        write(root, "tally/bug1.json", &tally_descriptor().to_string());
        Stub { dir }.with_manifest(&["tally/bug1.json", "middle/bug1.json"])
    }

    pub fn with_manifest(self, bugs: &[&str]) -> Stub {
        write(self.root(), "benchmark.json", &json!({ "bugs": bugs }).to_string());
        self
    }

    /// Adds another copy of the middle bug under a new project and id.
    pub fn add_middle_copy(&self, project: &str, bug_id: u32) -> String {
        let dir = format!("{project}_{bug_id}");
        write_middle_files(self.root(), &dir);
        let rel = format!("{dir}/bug.json");
        write(self.root(), &rel, &middle_descriptor(project, bug_id, &dir).to_string());
        rel
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn registry(&self) -> Registry {
        load_registry(self.root()).unwrap()
    }

    pub fn bug(&self, project: &str) -> Bug {
        self.registry().get_bug(project, 1).unwrap().clone()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root().join(rel)
    }
}

pub fn tokens(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

/// Every string with a derivation of at most `depth` nonterminal levels
/// from `nt`, skipping strings longer than `max_len`. Independent of the
/// parser: plain set-based expansion.
pub fn enumerate_language(
    g: &t4p_core::grammar::Grammar,
    nt: &str,
    depth: usize,
    max_len: usize,
) -> std::collections::BTreeSet<String> {
    use std::collections::{BTreeSet, HashMap};
    use t4p_core::grammar::Symbol;

    fn go(
        g: &t4p_core::grammar::Grammar,
        nt: &str,
        depth: usize,
        max_len: usize,
        memo: &mut HashMap<(String, usize), BTreeSet<String>>,
    ) -> BTreeSet<String> {
        if depth == 0 {
            return BTreeSet::new();
        }
        if let Some(hit) = memo.get(&(nt.to_string(), depth)) {
            return hit.clone();
        }
        let mut out = BTreeSet::new();
        for alt in g.alternatives(nt).unwrap() {
            let mut partial: BTreeSet<String> = BTreeSet::from([String::new()]);
            for sym in alt {
                let pieces = match sym {
                    Symbol::Terminal(t) => BTreeSet::from([t.clone()]),
                    Symbol::Nonterminal(n) => go(g, n, depth - 1, max_len, memo),
                };
                let longest = pieces.iter().map(String::len).max().unwrap_or(0);
                let mut by_len: Vec<Vec<&String>> = vec![Vec::new(); longest + 1];
                pieces.iter().for_each(|q| by_len[q.len()].push(q));
                let mut next = BTreeSet::new();
                for p in &partial {
                    let room = max_len.saturating_sub(p.len()).min(longest);
                    for q in by_len[..=room].iter().flatten() {
                        next.insert(format!("{p}{q}"));
                    }
                }
                partial = next;
                if partial.is_empty() {
                    break;
                }
            }
            out.extend(partial);
        }
        memo.insert((nt.to_string(), depth), out.clone());
        out
    }
    go(g, nt, depth, max_len, &mut HashMap::new())
}
