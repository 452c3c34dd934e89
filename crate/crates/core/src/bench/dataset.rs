use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BenchError;
use crate::dsl::parse;

pub const MAX_GROUND_TRUTHS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_temperature: Option<bool>,
    pub ground_truths: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_pvs: Option<Vec<String>>,
    #[serde(default)]
    pub tags: Vec<String>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<TaskRecord>, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// Parse and validate a `.jsonl` dataset: one record per non-blank line,
/// 1 to 5 ground truths that all parse, unique task ids.
pub fn parse_dataset(text: &str) -> Result<Vec<TaskRecord>, BenchError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line = i + 1;
        let value: Value = serde_json::from_str(raw).map_err(|e| BenchError::Dataset {
            line,
            task: None,
            field: "record".into(),
            message: e.to_string(),
        })?;
        let rec = check_record(line, &value)?;
        if !seen.insert(rec.task_id.clone()) {
            return Err(BenchError::Dataset {
                line,
                task: Some(rec.task_id),
                field: "task_id".into(),
                message: "duplicate task id".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn check_record(line: usize, v: &Value) -> Result<TaskRecord, BenchError> {
    let task = v.get("task_id").and_then(Value::as_str).map(str::to_string);
    let fail = |field: &str, message: &str| BenchError::Dataset {
        line,
        task: task.clone(),
        field: field.to_string(),
        message: message.to_string(),
    };
    let obj = v.as_object().ok_or_else(|| fail("record", "expected a JSON object"))?;
    match obj.get("task_id") {
        Some(Value::String(s)) if !s.is_empty() => {}
        Some(_) => return Err(fail("task_id", "expected a non-empty string")),
        None => return Err(fail("task_id", "missing")),
    }
    if !matches!(obj.get("prompt"), Some(Value::String(_))) {
        return Err(fail("prompt", "expected a string"));
    }
    let gts = match obj.get("ground_truths") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(fail("ground_truths", "expected a list of programs")),
        None => return Err(fail("ground_truths", "missing")),
    };
    if gts.is_empty() || gts.len() > MAX_GROUND_TRUTHS {
        return Err(fail("ground_truths", "need between 1 and 5 programs"));
    }
    for (k, g) in gts.iter().enumerate() {
        let field = format!("ground_truths[{k}]");
        let src = g.as_str().ok_or_else(|| fail(&field, "expected a string"))?;
        parse(src).map_err(|e| fail(&field, &e.to_string()))?;
    }
    if let Some(h) = obj.get("has_temperature") {
        if !(h.is_boolean() || h.is_null()) {
            return Err(fail("has_temperature", "expected a boolean"));
        }
    }
    if let Some(t) = obj.get("tracked_pvs") {
        let ok = t.is_null() || t.as_array().is_some_and(|a| a.iter().all(Value::is_string));
        if !ok {
            return Err(fail("tracked_pvs", "expected a list of pv names"));
        }
    }
    if let Some(t) = obj.get("tags") {
        if !t.as_array().is_some_and(|a| a.iter().all(Value::is_string)) {
            return Err(fail("tags", "expected a list of strings"));
        }
    }
    if let Some(k) = obj.keys().find(|k| {
        !matches!(
            k.as_str(),
            "task_id" | "prompt" | "has_temperature" | "ground_truths" | "tracked_pvs" | "tags"
        )
    }) {
        return Err(fail(k, "unknown field"));
    }
    serde_json::from_value(v.clone()).map_err(|e| fail("record", &e.to_string()))
}

/// Candidates file: a JSON object mapping task id to one program per run.
pub fn load_candidates(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<String>>, BenchError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    parse_candidates(&text)
}

pub fn parse_candidates(text: &str) -> Result<BTreeMap<String, Vec<String>>, BenchError> {
    let map: BTreeMap<String, Vec<String>> = serde_json::from_str(text).map_err(|e| BenchError::Dataset {
        line: e.line(),
        task: None,
        field: "candidates".into(),
        message: e.to_string(),
    })?;
    if let Some((id, _)) = map.iter().find(|(_, v)| v.is_empty()) {
        return Err(BenchError::Dataset {
            line: 0,
            task: Some(id.clone()),
            field: "candidates".into(),
            message: "no candidate programs".into(),
        });
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: BenchError) -> (Option<String>, String) {
        match err {
            BenchError::Dataset { task, field, .. } => (task, field),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_record() {
        let t = parse_dataset(r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()"]}"#).unwrap();
        assert_eq!(t[0].tags, Vec::<String>::new());
        assert_eq!(t[0].has_temperature, None);
    }

    #[test]
    fn missing_ground_truths() {
        let err = parse_dataset(r#"{"task_id":"a","prompt":"p"}"#).unwrap_err();
        assert_eq!(field_of(err), (Some("a".into()), "ground_truths".into()));
    }

    #[test]
    fn too_many_ground_truths() {
        let err = parse_dataset(r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()","acquire()","acquire()","acquire()","acquire()","acquire()"]}"#).unwrap_err();
        assert_eq!(field_of(err).1, "ground_truths");
    }

    #[test]
    fn duplicate_ids() {
        let line = r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()"]}"#;
        let err = parse_dataset(&format!("{line}\n\n{line}\n")).unwrap_err();
        match err {
            BenchError::Dataset { line, field, .. } => assert_eq!((line, field.as_str()), (3, "task_id")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unparseable_ground_truth() {
        let err = parse_dataset(r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()","move_rel(x,)"]}"#).unwrap_err();
        assert_eq!(field_of(err).1, "ground_truths[1]");
    }

    #[test]
    fn unknown_field() {
        let err = parse_dataset(r#"{"task_id":"a","prompt":"p","ground_truths":["acquire()"],"extra":1}"#).unwrap_err();
        assert_eq!(field_of(err).1, "extra");
    }

    #[test]
    fn candidates_file() {
        let c = parse_candidates(r#"{"a":["acquire()","sleep(1)"]}"#).unwrap();
        assert_eq!(c["a"].len(), 2);
        assert!(parse_candidates(r#"{"a":[]}"#).is_err());
        assert!(parse_candidates("[1]").is_err());
    }
}
