use serde::Serialize;

use super::{detokenize, generate_tree, tokenize, GenLimits};
use crate::execution::ExecError;
use crate::grammar::{features, parse_input, DerivationTree, FeatureMap, Grammar};
use crate::oracle::{Label, TestResult};
use crate::registry::{Bug, LabelingMode, TestCaseRecord};
use crate::seed::derive_seed;

/// How a generated test obtained its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Origin {
    Grammar,
    OracleFilter,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTest {
    /// The derived command line, exactly as generated.
    pub input: String,
    pub tokens: Vec<String>,
    pub label: Label,
    /// Derivation of `input` under the bug's main grammar.
    pub derivation: DerivationTree,
    pub origin: Origin,
}

impl LabeledTest {
    pub fn record(&self) -> TestCaseRecord {
        TestCaseRecord {
            tokens: self.tokens.clone(),
            label: self.label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Judgement {
    pub result: TestResult,
    pub duration_ms: u64,
}

/// Runs one system test against a buggy build and classifies it.
pub trait Judge {
    fn judge(&self, tokens: &[String], features: &FeatureMap) -> Result<Judgement, ExecError>;
}

#[derive(Debug, thiserror::Error)]
pub enum GenerationError {
    #[error("failing ratio {0} is outside [0, 1]")]
    InvalidRatio(f64),
    #[error("oracle-filtered labeling needs a compiled buggy workspace")]
    NeedsExecution,
    #[error(
        "generation exhausted after {attempts} attempts: {failing_found}/{failing_needed} FAILING, \
         {passing_found}/{passing_needed} PASSING"
    )]
    Exhausted {
        attempts: usize,
        failing_found: usize,
        failing_needed: usize,
        passing_found: usize,
        passing_needed: usize,
    },
    #[error(transparent)]
    Execution(#[from] ExecError),
}

/// `ceil(n * ratio)`, ignoring floating-point noise in the product.
pub fn failing_quota(n: usize, ratio: f64) -> usize {
    let exact = n as f64 * ratio;
    let nearest = exact.round();
    if (exact - nearest).abs() <= 1e-9 * exact.abs().max(1.0) {
        nearest as usize
    } else {
        exact.ceil() as usize
    }
}

/// Generates `n` labeled system tests, `failing_quota(n, failing_ratio)` of
/// them FAILING, with default limits.
pub fn generate_labeled_set(
    bug: &Bug,
    n: usize,
    failing_ratio: f64,
    seed: u64,
    judge: Option<&dyn Judge>,
) -> Result<Vec<LabeledTest>, GenerationError> {
    generate_labeled_set_with(bug, n, failing_ratio, seed, judge, &GenLimits::for_count(n), &mut |_| Ok(true))
}

/// Like [`generate_labeled_set`], with explicit limits and an extra
/// acceptance filter applied to every otherwise-valid candidate. Rejected
/// candidates count toward `limits.max_attempts`.
///
/// Slots `0..quota` are FAILING and the rest PASSING. The candidate for
/// slot `i`, attempt `a` is drawn with seed `derive_seed(seed, [i, a])`, so
/// the output does not depend on how candidates are scheduled.
pub fn generate_labeled_set_with(
    bug: &Bug,
    n: usize,
    failing_ratio: f64,
    seed: u64,
    judge: Option<&dyn Judge>,
    limits: &GenLimits,
    accept: &mut dyn FnMut(&LabeledTest) -> Result<bool, ExecError>,
) -> Result<Vec<LabeledTest>, GenerationError> {
    if !(0.0..=1.0).contains(&failing_ratio) {
        return Err(GenerationError::InvalidRatio(failing_ratio));
    }
    let quota = failing_quota(n, failing_ratio);
    let mode = bug.entry().labeling_mode;
    if mode == LabelingMode::OracleFilter && judge.is_none() {
        return Err(GenerationError::NeedsExecution);
    }
    let main = bug.grammar();
    let mut attempts = 0usize;
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        let label = if slot < quota { Label::Failing } else { Label::Passing };
        let mut attempt = 0u64;
        loop {
            if attempts >= limits.max_attempts {
                let failing_found = out.iter().filter(|t: &&LabeledTest| t.label == Label::Failing).count();
                return Err(GenerationError::Exhausted {
                    attempts,
                    failing_found,
                    failing_needed: quota,
                    passing_found: out.len() - failing_found,
                    passing_needed: n - quota,
                });
            }
            attempts += 1;
            let slot_seed = derive_seed(seed, &[slot as u64, attempt]);
            attempt += 1;
            let candidate = match mode {
                LabelingMode::Grammar => {
                    let source = match label {
                        Label::Failing => bug.failing_grammar(),
                        Label::Passing => bug.passing_grammar(),
                    }
                    .expect("GRAMMAR mode bugs carry both sub-grammars");
                    grammar_candidate(main, source, slot_seed, limits, label)
                }
                LabelingMode::OracleFilter => {
                    let judge = judge.expect("checked above");
                    oracle_candidate(main, slot_seed, limits, label, judge)?
                }
            };
            if let Some(test) = candidate {
                if accept(&test)? {
                    out.push(test);
                    break;
                }
            }
        }
    }
    Ok(out)
}

fn grammar_candidate(
    main: &Grammar,
    source: &Grammar,
    seed: u64,
    limits: &GenLimits,
    label: Label,
) -> Option<LabeledTest> {
    let input = generate_tree(source, seed, &limits.fitted_to(source)).frontier();
    let derivation = parse_input(main, &input).ok()?;
    Some(LabeledTest {
        tokens: tokenize(&input),
        input,
        label,
        derivation,
        origin: Origin::Grammar,
    })
}

fn oracle_candidate(
    main: &Grammar,
    seed: u64,
    limits: &GenLimits,
    label: Label,
    judge: &dyn Judge,
) -> Result<Option<LabeledTest>, ExecError> {
    let input = generate_tree(main, seed, &limits.fitted_to(main)).frontier();
    let tokens = tokenize(&input);
    // re-parse: the stored derivation must be the canonical one for `input`
    let Ok(derivation) = parse_input(main, &input) else {
        return Ok(None);
    };
    let verdict = judge.judge(&tokens, &features(&derivation))?;
    if verdict.result != label.as_result() {
        return Ok(None);
    }
    Ok(Some(LabeledTest {
        input,
        tokens,
        label,
        derivation,
        origin: Origin::OracleFilter,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationEntry {
    pub tokens: Vec<String>,
    pub expected: Label,
    pub observed: TestResult,
    pub matches: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub entries: Vec<VerificationEntry>,
    pub all_match: bool,
}

impl VerificationReport {
    pub fn matched(&self) -> usize {
        self.entries.iter().filter(|e| e.matches).count()
    }

    pub fn mismatches(&self) -> impl Iterator<Item = &VerificationEntry> {
        self.entries.iter().filter(|e| !e.matches)
    }
}

/// Runs every test through `judge` and compares the verdict with its label.
/// Inputs outside the bug's grammar are reported as UNDEFINED mismatches.
pub fn verify_labels(bug: &Bug, tests: &[TestCaseRecord], judge: &dyn Judge) -> Result<VerificationReport, ExecError> {
    let mut entries = Vec::with_capacity(tests.len());
    for test in tests {
        let input = detokenize(&test.tokens);
        let (observed, error) = match parse_input(bug.grammar(), &input) {
            Ok(tree) => (judge.judge(&test.tokens, &features(&tree))?.result, None),
            Err(e) => (TestResult::Undefined, Some(e.to_string())),
        };
        entries.push(VerificationEntry {
            tokens: test.tokens.clone(),
            expected: test.label,
            observed,
            matches: observed == test.label.as_result(),
            error,
        });
    }
    let all_match = entries.iter().all(|e| e.matches);
    Ok(VerificationReport { entries, all_match })
}
