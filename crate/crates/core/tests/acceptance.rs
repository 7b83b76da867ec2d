//! End-to-end acceptance checks on toy grammars, a stub dual-grammar bug and
//! synthetic observations. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{enumerate_language, Stub};
use t4p_core::fuzzing::{generate_labeled_set, generate_tree, GenLimits, LabeledTest};
use t4p_core::grammar::{grammar_precision_recall, load_grammar, parse_input, FeatureMap, Grammar, Symbol};
use t4p_core::oracle::{
    evaluate, Channel, OracleSpec, Pattern, Predicate, ReferenceOutput, Relation, RunObservation, TestResult,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const TOY_GRAMMARS: [(&str, &str); 5] = [
    ("digits", "<start> ::= <d> | <d> <start>\n<d> ::= \"0\" | \"1\" | \"2\"\n"),
    (
        "expr",
        "<expr> ::= <expr> \"-\" <term> | <term>\n<term> ::= \"(\" <expr> \")\" | <num>\n<num> ::= \"1\" | \"2\" | \"8\"\n",
    ),
    ("parens", "<s> ::= \"\" | \"(\" <s> \")\" <s>\n"),
    (
        "markup",
        "<doc> ::= <node> | <node> <doc>\n<node> ::= <text> | \"<b>\" <doc> \"</b>\"\n<text> ::= \"hi\" | \"!\" | \"\"\n",
    ),
    ("ambiguous", "<e> ::= <e> \"+\" <e> | <e> \"*\" <e> | \"(\" <e> \")\" | \"a\" | \"ab\"\n"),
];

const SAMPLES_PER_GRAMMAR: u64 = 1000;
const ENUMERATION_DEPTH: usize = 6;
const ENUMERATION_MAX_LEN: usize = 12;

fn grammar_round_trip() -> Outcome {
    let started = Instant::now();
    let mut enumerated = 0usize;
    for (name, text) in TOY_GRAMMARS {
        let g = load_grammar(text).map_err(|e| format!("{name}: {e}"))?;
        let limits = GenLimits::default().fitted_to(&g);
        for seed in 0..SAMPLES_PER_GRAMMAR {
            let s = generate_tree(&g, seed, &limits).frontier();
            if parse_input(&g, &s).is_err() {
                return Err(format!("{name}: seed {seed} generated {s:?}, which does not parse"));
            }
        }
        let language = enumerate_language(&g, g.start(), ENUMERATION_DEPTH, ENUMERATION_MAX_LEN);
        if language.is_empty() {
            return Err(format!("{name}: empty depth-{ENUMERATION_DEPTH} enumeration"));
        }
        for s in &language {
            if parse_input(&g, s).is_err() {
                return Err(format!("{name}: enumerated {s:?} but parse_input rejects it"));
            }
            let outside = format!("{s}\u{1}");
            if parse_input(&g, &outside).is_ok() {
                return Err(format!("{name}: parse_input accepts {outside:?}"));
            }
        }
        enumerated += language.len();
    }
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}, limit 10 s"));
    }
    Ok(format!(
        "{} grammars x {SAMPLES_PER_GRAMMAR} samples re-parsed, {enumerated} enumerated strings agree, {elapsed:.2?}",
        TOY_GRAMMARS.len()
    ))
}

fn proportion_exactness() -> Outcome {
    let stub = Stub::new();
    let bug = stub.bug("middle");
    let failing_grammar = bug.failing_grammar().expect("dual-grammar stub");
    let passing_grammar = bug.passing_grammar().expect("dual-grammar stub");
    let mut cases = 0;
    for n in [1usize, 7, 10, 100] {
        for ratio in [0.0, 0.25, 0.5, 1.0] {
            // ceil(n * ratio) in exact integer arithmetic; every ratio is a multiple of 1/4
            let expected = (n * (ratio * 4.0) as usize).div_ceil(4);
            let run = |seed| generate_labeled_set(&bug, n, ratio, seed, None).map_err(|e| format!("n={n} ratio={ratio}: {e}"));
            let first = run(42)?;
            let second = run(42)?;
            let failing = first.iter().filter(|t| t.label.as_result() == TestResult::Failing).count();
            if first.len() != n || failing != expected {
                return Err(format!("n={n} ratio={ratio}: {} tests, {failing} FAILING, expected {expected}", first.len()));
            }
            let tokens = |set: &[LabeledTest]| set.iter().map(|t| t.tokens.clone()).collect::<Vec<_>>();
            if tokens(&first) != tokens(&second) {
                return Err(format!("n={n} ratio={ratio}: reruns with equal seeds differ"));
            }
            for t in &first {
                let source = if t.label.as_result() == TestResult::Failing { failing_grammar } else { passing_grammar };
                if parse_input(source, &t.input).is_err() || parse_input(bug.grammar(), &t.input).is_err() {
                    return Err(format!("n={n} ratio={ratio}: {:?} is outside its grammars", t.input));
                }
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} (n, ratio) cases exact and rerun-identical"))
}

fn observation_corpus() -> Vec<RunObservation> {
    let mut out = Vec::new();
    for exit_code in [Some(0), Some(1), Some(2), None] {
        for stdout in ["", "2\n", "Override applied\n", "Error: line 42\n"] {
            for (stderr, created) in [("", vec![]), ("Traceback: boom\n", vec!["out.txt"]), ("usage\n", vec!["dir/", "dir/x"])] {
                for timed_out in [false, true] {
                    out.push(RunObservation {
                        exit_code: if timed_out { None } else { exit_code },
                        stdout: stdout.into(),
                        stderr: stderr.into(),
                        duration_ms: 5,
                        timed_out,
                        created_files: created.iter().map(|s| s.to_string()).collect(),
                        tokens: vec!["x".into()],
                    });
                }
            }
        }
    }
    out
}

fn all_constructors() -> Vec<Predicate> {
    let leaves = vec![
        Predicate::ExitCodeIs(Relation::Eq, 0),
        Predicate::ExitCodeIs(Relation::Neq, 1),
        Predicate::StdoutContains("Override".into()),
        Predicate::StderrContains("Traceback".into()),
        Predicate::StdoutMatchesPattern(Pattern::new("^Error:.*line [0-9]*$").expect("valid pattern")),
        Predicate::FileExists("./out.txt".into()),
        Predicate::FeaturePresent("override".into()),
        Predicate::FeatureEquals("mode".into(), "websocket".into()),
        Predicate::RefDiffers(Channel::Stdout),
        Predicate::RefDiffers(Channel::Stderr),
    ];
    let mut all = leaves.clone();
    all.push(Predicate::All(leaves[..3].to_vec()));
    all.push(Predicate::All(vec![]));
    all.push(Predicate::Any(leaves[3..].to_vec()));
    all.push(Predicate::Any(vec![]));
    all.push(Predicate::Not(Box::new(leaves[2].clone())));
    all.push(Predicate::All(vec![
        Predicate::FeatureEquals("mode".into(), "websocket".into()),
        Predicate::FeaturePresent("override".into()),
        Predicate::Not(Box::new(Predicate::StdoutContains("Override".into()))),
    ]));
    all
}

fn oracle_totality() -> Outcome {
    let corpus = observation_corpus();
    let feature_maps: Vec<FeatureMap> = vec![
        FeatureMap::default(),
        [("mode", "websocket"), ("override", "--force")].into_iter().collect(),
    ];
    let reference = ReferenceOutput {
        exit_code: Some(0),
        stdout: "2".into(),
        stderr: String::new(),
    };
    let preds = all_constructors();
    let specs: Vec<OracleSpec> = preds
        .iter()
        .flat_map(|p| {
            [
                OracleSpec::new(p.clone()),
                OracleSpec::new(p.clone()).with_undefined_when(Predicate::ExitCodeIs(Relation::Eq, 2)),
            ]
        })
        .collect();
    let run = || -> Result<Vec<TestResult>, String> {
        let mut verdicts = Vec::new();
        for spec in &specs {
            for obs in &corpus {
                for feats in &feature_maps {
                    let v = evaluate(spec, obs, feats, Some(&reference)).map_err(|e| format!("{spec:?}: {e}"))?;
                    if obs.timed_out && v != TestResult::Undefined {
                        return Err(format!("timed-out observation judged {v} under {spec:?}"));
                    }
                    verdicts.push(v);
                }
            }
        }
        Ok(verdicts)
    };
    let first = run()?;
    for round in 2..=3 {
        if run()? != first {
            return Err(format!("verdicts changed on run {round}"));
        }
    }
    let kinds: BTreeSet<String> = first.iter().map(|v| v.to_string()).collect();
    Ok(format!(
        "{} observations x {} specs x {} feature maps, 3 identical runs, verdicts seen: {}",
        corpus.len(),
        specs.len(),
        feature_maps.len(),
        kinds.into_iter().collect::<Vec<_>>().join("/")
    ))
}

/// Probability that one sample of `truth` lands in `candidate`'s language,
/// for grammars whose start alternatives are single terminals: the
/// generator picks start alternatives uniformly.
fn expected_recall(candidate: &Grammar, truth: &Grammar) -> f64 {
    let accepted = enumerate_language(candidate, candidate.start(), 2, usize::MAX);
    let alts = truth.alternatives(truth.start()).expect("start rule");
    let hits = alts
        .iter()
        .filter(|alt| match alt.as_slice() {
            [Symbol::Terminal(t)] => accepted.contains(t),
            _ => panic!("expectation oracle only handles single-terminal alternatives"),
        })
        .count();
    hits as f64 / alts.len() as f64
}

fn precision_recall() -> Outcome {
    let zero_one = load_grammar("<start> ::= \"0\" | \"1\"").expect("valid");
    let zero = load_grammar("<start> ::= \"0\"").expect("valid");
    let one = load_grammar("<start> ::= \"1\"").expect("valid");
    let k = 1000;
    let seed = 2024;
    let same = grammar_precision_recall(&zero_one, &zero_one, k, seed);
    if same != (1.0, 1.0) {
        return Err(format!("identical grammars gave {same:?}"));
    }
    let disjoint = grammar_precision_recall(&zero, &one, k, seed);
    if disjoint != (0.0, 0.0) {
        return Err(format!("disjoint grammars gave {disjoint:?}"));
    }
    let (precision, recall) = grammar_precision_recall(&zero, &zero_one, k, seed);
    let expected = expected_recall(&zero, &zero_one);
    if precision != 1.0 || (recall - expected).abs() > 0.05 {
        return Err(format!("subset case gave ({precision}, {recall}), expected (1.0, {expected} +- 0.05)"));
    }
    Ok(format!("identical (1, 1); disjoint (0, 0); subset ({precision}, {recall:.3}) vs expected recall {expected}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 4] = [
        ("grammar round-trip and membership", grammar_round_trip),
        ("proportion exactness", proportion_exactness),
        ("oracle totality and determinism", oracle_totality),
        ("precision/recall sanity", precision_recall),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
