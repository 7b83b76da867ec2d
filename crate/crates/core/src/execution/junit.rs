//! Reading unit-runner result files in the common XML test-report layout:
//! a `testsuite` (or `testsuites`) root with `testcase` elements, each with
//! an optional `failure`, `error` or `skipped` child. Unknown elements and
//! attributes are ignored.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseOutcome {
    Passed,
    Failed,
    Errored,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitCase {
    pub name: String,
    pub classname: Option<String>,
    pub time_secs: Option<f64>,
    pub outcome: CaseOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JunitError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("unexpected root element <{0}>")]
    Root(String),
}

pub fn parse_junit(text: &str) -> Result<Vec<UnitCase>, JunitError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| JunitError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let root_name = root.tag_name().name();
    if root_name != "testsuite" && root_name != "testsuites" {
        return Err(JunitError::Root(root_name.to_string()));
    }
    let cases = root
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "testcase")
        .map(|case| {
            let mut outcome = CaseOutcome::Passed;
            for child in case.children().filter(|c| c.is_element()) {
                // error outranks failure, failure outranks skipped
                let seen = match child.tag_name().name() {
                    "error" => CaseOutcome::Errored,
                    "failure" => CaseOutcome::Failed,
                    "skipped" => CaseOutcome::Skipped,
                    _ => continue,
                };
                outcome = match (outcome, seen) {
                    (CaseOutcome::Errored, _) | (_, CaseOutcome::Errored) => CaseOutcome::Errored,
                    (CaseOutcome::Failed, _) | (_, CaseOutcome::Failed) => CaseOutcome::Failed,
                    _ => CaseOutcome::Skipped,
                };
            }
            UnitCase {
                name: case.attribute("name").unwrap_or_default().to_string(),
                classname: case.attribute("classname").map(str::to_string),
                time_secs: case.attribute("time").and_then(|t| t.trim().parse().ok()),
                outcome,
            }
        })
        .collect();
    Ok(cases)
}
