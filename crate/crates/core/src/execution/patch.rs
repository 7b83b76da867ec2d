//! Unified diffs: parsing and strict application.
//!
//! Hunks must match at exactly the line numbers in their headers; there is
//! no offset search and no fuzz. `a/` and `b/` path prefixes are stripped,
//! `/dev/null` marks file creation or deletion, and `\ No newline at end of
//! file` markers are honored.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatchError {
    #[error("patch line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{file}: hunk #{hunk} does not match at line {line}")]
    HunkMismatch { file: String, hunk: usize, line: usize },
    #[error("{0}: path escapes the target directory")]
    UnsafePath(String),
    #[error("{file}: {message}")]
    Target { file: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HunkLine {
    Context(String),
    Remove(String),
    Add(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hunk {
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    /// Lines keep their `\n` terminator unless the diff marked them as
    /// lacking one.
    pub lines: Vec<HunkLine>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    /// `None` when the file is created.
    pub old_path: Option<String>,
    /// `None` when the file is deleted.
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn target(&self) -> &str {
        self.new_path.as_deref().or(self.old_path.as_deref()).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub files: Vec<FilePatch>,
}

fn header_path(rest: &str, prefix: &str) -> Option<String> {
    let raw = rest.trim_end_matches(['\n', '\r']);
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end();
    if raw == "/dev/null" {
        return None;
    }
    Some(raw.strip_prefix(prefix).unwrap_or(raw).to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((start, len)) => Some((start.parse().ok()?, len.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize)> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, _) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(" +")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl))
}

pub fn parse_patch(text: &str) -> Result<Patch, PatchError> {
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let err = |i: usize, message: &str| PatchError::Parse {
        line: i + 1,
        message: message.to_string(),
    };
    let mut files = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(old) = lines[i].strip_prefix("--- ") else {
            i += 1;
            continue;
        };
        let new = lines
            .get(i + 1)
            .and_then(|l| l.strip_prefix("+++ "))
            .ok_or_else(|| err(i + 1, "expected `+++` after `---`"))?;
        let mut file = FilePatch {
            old_path: header_path(old, "a/"),
            new_path: header_path(new, "b/"),
            hunks: Vec::new(),
        };
        if file.old_path.is_none() && file.new_path.is_none() {
            return Err(err(i, "both paths are /dev/null"));
        }
        i += 2;
        while i < lines.len() && lines[i].starts_with("@@") {
            let (old_start, old_len, new_start, new_len) =
                parse_hunk_header(lines[i]).ok_or_else(|| err(i, "malformed hunk header"))?;
            i += 1;
            let mut hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                lines: Vec::new(),
            };
            let (mut old_seen, mut new_seen) = (0, 0);
            while old_seen < old_len || new_seen < new_len {
                let Some(&line) = lines.get(i) else {
                    return Err(err(i, "hunk ends early"));
                };
                let (tag, body) = match line.chars().next() {
                    Some(c @ (' ' | '-' | '+')) => (c, &line[1..]),
                    // some tools drop the space of an empty context line
                    Some('\n') | Some('\r') => (' ', line),
                    _ => return Err(err(i, "unexpected line inside hunk")),
                };
                match tag {
                    ' ' => {
                        hunk.lines.push(HunkLine::Context(body.to_string()));
                        old_seen += 1;
                        new_seen += 1;
                    }
                    '-' => {
                        hunk.lines.push(HunkLine::Remove(body.to_string()));
                        old_seen += 1;
                    }
                    _ => {
                        hunk.lines.push(HunkLine::Add(body.to_string()));
                        new_seen += 1;
                    }
                }
                i += 1;
                if lines.get(i).is_some_and(|l| l.starts_with('\\')) {
                    strip_newline(hunk.lines.last_mut().expect("a line was just pushed"));
                    i += 1;
                }
            }
            if old_seen != old_len || new_seen != new_len {
                return Err(err(i - 1, "hunk line counts disagree with its header"));
            }
            file.hunks.push(hunk);
        }
        if file.hunks.is_empty() {
            return Err(err(i.saturating_sub(1), "file header without hunks"));
        }
        files.push(file);
    }
    if files.is_empty() {
        return Err(err(0, "no file patches found"));
    }
    Ok(Patch { files })
}

fn strip_newline(line: &mut HunkLine) {
    let text = match line {
        HunkLine::Context(t) | HunkLine::Remove(t) | HunkLine::Add(t) => t,
    };
    if text.ends_with('\n') {
        text.pop();
        if text.ends_with('\r') {
            text.pop();
        }
    }
}

/// Applies the hunks of one file patch to `original`.
pub fn apply_file_patch(file: &FilePatch, original: &str) -> Result<String, PatchError> {
    let old: Vec<&str> = original.split_inclusive('\n').collect();
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0usize;
    for (h_idx, hunk) in file.hunks.iter().enumerate() {
        let mismatch = |line: usize| PatchError::HunkMismatch {
            file: file.target().to_string(),
            hunk: h_idx + 1,
            line,
        };
        // a zero-length old range names the line after which to insert
        let start = if hunk.old_len == 0 { hunk.old_start } else { hunk.old_start.saturating_sub(1) };
        if start < cursor || start > old.len() {
            return Err(mismatch(hunk.old_start));
        }
        old[cursor..start].iter().for_each(|l| out.push_str(l));
        cursor = start;
        for line in &hunk.lines {
            match line {
                HunkLine::Context(t) | HunkLine::Remove(t) => {
                    if old.get(cursor) != Some(&t.as_str()) {
                        return Err(mismatch(cursor + 1));
                    }
                    if matches!(line, HunkLine::Context(_)) {
                        out.push_str(t);
                    }
                    cursor += 1;
                }
                HunkLine::Add(t) => out.push_str(t),
            }
        }
    }
    old[cursor..].iter().for_each(|l| out.push_str(l));
    Ok(out)
}

fn safe_relative(path: &str) -> Result<PathBuf, PatchError> {
    let p = Path::new(path);
    let ok = !path.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir));
    if ok {
        Ok(p.to_path_buf())
    } else {
        Err(PatchError::UnsafePath(path.to_string()))
    }
}

/// Computes every file change first and writes nothing unless all hunks
/// apply. Returns the changed paths relative to `dir`.
pub fn apply_patch_to_dir(patch: &Patch, dir: &Path) -> Result<Vec<PathBuf>, PatchError> {
    let mut changes: BTreeMap<PathBuf, Option<String>> = BTreeMap::new();
    for file in &patch.files {
        let target_err = |message: String| PatchError::Target {
            file: file.target().to_string(),
            message,
        };
        let rel = safe_relative(file.target())?;
        let original = match &file.old_path {
            None => {
                if dir.join(&rel).exists() {
                    return Err(target_err("file to be created already exists".into()));
                }
                String::new()
            }
            Some(old) => {
                let old_rel = safe_relative(old)?;
                match changes.get(&old_rel) {
                    Some(Some(pending)) => pending.clone(),
                    Some(None) => return Err(target_err("file was deleted earlier in the patch".into())),
                    None => fs::read_to_string(dir.join(&old_rel)).map_err(|e| target_err(e.to_string()))?,
                }
            }
        };
        let patched = apply_file_patch(file, &original)?;
        changes.insert(rel, file.new_path.as_ref().map(|_| patched));
    }
    for (rel, content) in &changes {
        let full = dir.join(rel);
        let write_err = |e: std::io::Error| PatchError::Target {
            file: rel.display().to_string(),
            message: e.to_string(),
        };
        match content {
            Some(text) => {
                if let Some(parent) = full.parent() {
                    fs::create_dir_all(parent).map_err(write_err)?;
                }
                fs::write(&full, text).map_err(write_err)?;
            }
            None => fs::remove_file(&full).map_err(write_err)?,
        }
    }
    Ok(changes.into_keys().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIDDLE: &str = "def middle(x, y, z):\n    if y < z:\n        if x < y:\n            return y\n        elif x < z:\n            return y\n    return z\n";

    const FIX: &str = "--- a/middle.py\n+++ b/middle.py\n@@ -3,5 +3,5 @@\n         if x < y:\n             return y\n         elif x < z:\n-            return y\n+            return x\n     return z\n";

    #[test]
    fn parses_headers_and_hunks() {
        let p = parse_patch(FIX).unwrap();
        assert_eq!(p.files.len(), 1);
        let f = &p.files[0];
        assert_eq!(f.old_path.as_deref(), Some("middle.py"));
        assert_eq!(f.new_path.as_deref(), Some("middle.py"));
        assert_eq!((f.hunks[0].old_start, f.hunks[0].old_len), (3, 5));
        assert_eq!(f.hunks[0].lines.len(), 6);
    }

    #[test]
    fn applies_strictly() {
        let p = parse_patch(FIX).unwrap();
        let fixed = apply_file_patch(&p.files[0], MIDDLE).unwrap();
        assert!(fixed.contains("elif x < z:\n            return x\n"));
        assert_eq!(fixed.lines().count(), MIDDLE.lines().count());
    }

    #[test]
    fn context_mismatch_names_hunk() {
        let p = parse_patch(FIX).unwrap();
        let drifted = format!("# header\n{MIDDLE}");
        let err = apply_file_patch(&p.files[0], &drifted).unwrap_err();
        assert!(matches!(err, PatchError::HunkMismatch { hunk: 1, .. }));
    }

    #[test]
    fn no_newline_markers() {
        let diff = "--- a/f\n+++ b/f\n@@ -1 +1 @@\n-old\n\\ No newline at end of file\n+new\n\\ No newline at end of file\n";
        let p = parse_patch(diff).unwrap();
        assert_eq!(apply_file_patch(&p.files[0], "old").unwrap(), "new");
        assert!(apply_file_patch(&p.files[0], "old\n").is_err());
    }

    #[test]
    fn creation_and_deletion() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("gone.txt"), "bye\n").unwrap();
        let diff = "--- /dev/null\n+++ b/sub/new.txt\n@@ -0,0 +1,2 @@\n+one\n+two\n--- a/gone.txt\n+++ /dev/null\n@@ -1 +0,0 @@\n-bye\n";
        let changed = apply_patch_to_dir(&parse_patch(diff).unwrap(), dir.path()).unwrap();
        assert_eq!(changed.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("sub/new.txt")).unwrap(), "one\ntwo\n");
        assert!(!dir.path().join("gone.txt").exists());
    }

    #[test]
    fn failed_patch_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "1\n").unwrap();
        fs::write(dir.path().join("b.txt"), "2\n").unwrap();
        let diff = "--- a/a.txt\n+++ b/a.txt\n@@ -1 +1 @@\n-1\n+one\n--- a/b.txt\n+++ b/b.txt\n@@ -1 +1 @@\n-X\n+two\n";
        assert!(apply_patch_to_dir(&parse_patch(diff).unwrap(), dir.path()).is_err());
        assert_eq!(fs::read_to_string(dir.path().join("a.txt")).unwrap(), "1\n");
    }

    #[test]
    fn rejects_escaping_paths_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let diff = "--- a/../x\n+++ b/../x\n@@ -0,0 +1 @@\n+x\n";
        assert!(matches!(
            apply_patch_to_dir(&parse_patch(diff).unwrap(), dir.path()),
            Err(PatchError::UnsafePath(_))
        ));
        assert!(parse_patch("not a diff").is_err());
        assert!(parse_patch("--- a/f\n+++ b/f\n@@ -1,2 +1,2 @@\n-x\n").is_err());
        assert!(parse_patch("--- a/f\n+++ b/f\n@@ -1 +1 @@\n?x\n").is_err());
    }
}
