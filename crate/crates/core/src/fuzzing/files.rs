//! On-disk layout of generated system tests: one file per test named
//! `t4p_systemtest_<index>_<label>` holding the derived command line (no
//! trailing newline), plus a `tests.jsonl` sidecar of token/label records.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::LabeledTest;
use crate::oracle::Label;
use crate::registry::write_curated;

pub const SYSTEM_TEST_PREFIX: &str = "t4p_systemtest_";
pub const SIDECAR_FILE: &str = "tests.jsonl";

pub fn system_test_file_name(index: usize, label: Label) -> String {
    format!("{SYSTEM_TEST_PREFIX}{index}_{}", label.file_tag())
}

/// Splits `<prefix><index>_<label>[.<ext>]` into index and label.
pub fn parse_indexed_name(name: &str, prefix: &str) -> Option<(usize, Label)> {
    let rest = name.strip_prefix(prefix)?;
    let stem = rest.split('.').next().unwrap_or(rest);
    let (index, label) = stem.split_once('_')?;
    Some((index.parse().ok()?, label.parse().ok()?))
}

/// Writes one file per test plus the sidecar, replacing any test files a
/// previous run left in `dir`.
pub fn write_system_tests(dir: &Path, tests: &[LabeledTest]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    remove_indexed_files(dir, SYSTEM_TEST_PREFIX)?;
    let mut paths = Vec::with_capacity(tests.len());
    for (i, test) in tests.iter().enumerate() {
        let path = dir.join(system_test_file_name(i, test.label));
        fs::write(&path, &test.input)?;
        paths.push(path);
    }
    let records: Vec<_> = tests.iter().map(LabeledTest::record).collect();
    fs::write(dir.join(SIDECAR_FILE), write_curated(&records))?;
    Ok(paths)
}

/// Test files in `dir` whose names carry `prefix`, ordered by index.
pub fn list_indexed_files(dir: &Path, prefix: &str) -> io::Result<Vec<(usize, Label, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some((index, label)) = parse_indexed_name(name, prefix) {
            found.push((index, label, entry.path()));
        }
    }
    found.sort_by(|a, b| (a.0, &a.2).cmp(&(b.0, &b.2)));
    Ok(found)
}

pub fn remove_indexed_files(dir: &Path, prefix: &str) -> io::Result<()> {
    for (_, _, path) in list_indexed_files(dir, prefix)? {
        fs::remove_file(path)?;
    }
    Ok(())
}
