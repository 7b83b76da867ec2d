//! JSON encoding of oracle specs.
//!
//! ```json
//! {"undefined_when": {"exit_code": {"eq": 2}},
//!  "failing_when": {"all": [{"feature_eq": ["mode", "websocket"]},
//!                           {"not": {"stdout_contains": "Override"}}]}}
//! ```

use serde_json::{json, Map, Value};

use super::{Channel, OracleSpec, Pattern, PatternError, Predicate, Relation};

#[derive(Debug, thiserror::Error)]
pub enum OracleSpecError {
    #[error("invalid oracle JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {message}")]
    Shape { path: String, message: String },
    #[error("{path}: unknown predicate {name:?}")]
    UnknownPredicate { path: String, name: String },
    #[error("{path}: {source}")]
    Pattern { path: String, source: PatternError },
}

fn shape(path: &str, message: impl Into<String>) -> OracleSpecError {
    OracleSpecError::Shape {
        path: path.to_string(),
        message: message.into(),
    }
}

pub fn load_oracle_spec(text: &str) -> Result<OracleSpec, OracleSpecError> {
    let value: Value = serde_json::from_str(text)?;
    let Value::Object(obj) = value else {
        return Err(shape("$", "expected an object"));
    };
    if let Some(key) = obj.keys().find(|k| *k != "failing_when" && *k != "undefined_when") {
        return Err(shape("$", format!("unknown key {key:?}")));
    }
    let failing_when = match obj.get("failing_when") {
        Some(v) => predicate(v, "failing_when")?,
        None => return Err(shape("$", "missing \"failing_when\"")),
    };
    let undefined_when = match obj.get("undefined_when") {
        None | Some(Value::Null) => None,
        Some(v) => Some(predicate(v, "undefined_when")?),
    };
    Ok(OracleSpec {
        undefined_when,
        failing_when,
    })
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str, OracleSpecError> {
    v.as_str().ok_or_else(|| shape(path, "expected a string"))
}

fn list<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, OracleSpecError> {
    v.as_array().ok_or_else(|| shape(path, "expected an array"))
}

fn predicate(v: &Value, path: &str) -> Result<Predicate, OracleSpecError> {
    let obj = v.as_object().ok_or_else(|| shape(path, "expected a single-key object"))?;
    if obj.len() != 1 {
        return Err(shape(path, "expected a single-key object"));
    }
    let (name, arg) = obj.iter().next().expect("length checked");
    let here = format!("{path}.{name}");
    let children = |arg: &Value| -> Result<Vec<Predicate>, OracleSpecError> {
        list(arg, &here)?
            .iter()
            .enumerate()
            .map(|(i, c)| predicate(c, &format!("{here}[{i}]")))
            .collect()
    };
    Ok(match name.as_str() {
        "exit_code" => {
            let rel = arg
                .as_object()
                .filter(|o| o.len() == 1)
                .ok_or_else(|| shape(&here, "expected {\"eq\"|\"neq\": int}"))?;
            let (op, value) = rel.iter().next().expect("length checked");
            let relation = match op.as_str() {
                "eq" => Relation::Eq,
                "neq" => Relation::Neq,
                other => return Err(shape(&here, format!("unknown relation {other:?}"))),
            };
            let value = value.as_i64().ok_or_else(|| shape(&here, "expected an integer"))?;
            Predicate::ExitCodeIs(relation, value)
        }
        "stdout_contains" => Predicate::StdoutContains(string(arg, &here)?.to_string()),
        "stderr_contains" => Predicate::StderrContains(string(arg, &here)?.to_string()),
        "stdout_matches" => Predicate::StdoutMatchesPattern(
            Pattern::new(string(arg, &here)?).map_err(|source| OracleSpecError::Pattern {
                path: here.clone(),
                source,
            })?,
        ),
        "file_exists" => {
            let p = string(arg, &here)?;
            if p.starts_with('/') {
                return Err(shape(&here, "path must be relative"));
            }
            Predicate::FileExists(p.to_string())
        }
        "feature_present" => Predicate::FeaturePresent(string(arg, &here)?.to_string()),
        "feature_eq" => match list(arg, &here)?.as_slice() {
            [nt, text] => Predicate::FeatureEquals(string(nt, &here)?.to_string(), string(text, &here)?.to_string()),
            _ => return Err(shape(&here, "expected [nonterminal, text]")),
        },
        "ref_differs" => match string(arg, &here)? {
            "stdout" => Predicate::RefDiffers(Channel::Stdout),
            "stderr" => Predicate::RefDiffers(Channel::Stderr),
            other => return Err(shape(&here, format!("unknown channel {other:?}"))),
        },
        "all" => Predicate::All(children(arg)?),
        "any" => Predicate::Any(children(arg)?),
        "not" => Predicate::Not(Box::new(predicate(arg, &here)?)),
        _ => {
            return Err(OracleSpecError::UnknownPredicate {
                path: path.to_string(),
                name: name.clone(),
            })
        }
    })
}

fn encode(p: &Predicate) -> Value {
    match p {
        Predicate::ExitCodeIs(Relation::Eq, v) => json!({"exit_code": {"eq": v}}),
        Predicate::ExitCodeIs(Relation::Neq, v) => json!({"exit_code": {"neq": v}}),
        Predicate::StdoutContains(t) => json!({"stdout_contains": t}),
        Predicate::StderrContains(t) => json!({"stderr_contains": t}),
        Predicate::StdoutMatchesPattern(p) => json!({"stdout_matches": p.as_str()}),
        Predicate::FileExists(f) => json!({"file_exists": f}),
        Predicate::FeaturePresent(n) => json!({"feature_present": n}),
        Predicate::FeatureEquals(n, t) => json!({"feature_eq": [n, t]}),
        Predicate::RefDiffers(c) => json!({"ref_differs": c.name()}),
        Predicate::All(ps) => json!({"all": ps.iter().map(encode).collect::<Vec<_>>()}),
        Predicate::Any(ps) => json!({"any": ps.iter().map(encode).collect::<Vec<_>>()}),
        Predicate::Not(p) => json!({"not": encode(p)}),
    }
}

pub fn serialize_oracle_spec(spec: &OracleSpec) -> String {
    let mut obj = Map::new();
    if let Some(u) = &spec.undefined_when {
        obj.insert("undefined_when".into(), encode(u));
    }
    obj.insert("failing_when".into(), encode(&spec.failing_when));
    serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values always serialize")
}
