//! `--set key=value` overrides on a JSON document.
//!
//! Keys are dotted paths; array elements are addressed by zero-based index
//! (`sites.1.energy`). Only existing keys can be set, so a typo fails
//! instead of silently adding a field. Values are parsed as JSON when
//! possible and otherwise taken as strings (`spectral_kind=J3`).

use serde_json::Value;

pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn apply(doc: &mut Value, assignment: &str) -> Result<(), String> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| format!("override {assignment:?} is not key=value"))?;
    let mut node = doc;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(move |i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| format!("unknown key {path:?}"))?;
    }
    *node = parse_value(raw);
    Ok(())
}

pub fn apply_all(doc: &mut Value, assignments: &[String]) -> Result<(), String> {
    assignments.iter().try_for_each(|a| apply(doc, a))
}
