//! One-parameter sweeps over a scenario.

use rayon::prelude::*;
use serde_json::Value;

use super::config::{load_scenario, Scenario};
use super::report::SimReport;
use super::run::run;
use super::EngineError;

/// Set the numeric parameter at `path` in a scenario document.
///
/// Paths are dot-separated keys. Array elements are addressed by index or by
/// `id` (platforms) or `A-B` (links), e.g. `platforms.sat.orbit.altitude_m`
/// or `links.0.min_elevation_b_deg`.
pub fn set_parameter(doc: &mut Value, path: &str, value: f64) -> Result<(), EngineError> {
    let bad = |why: String| EngineError::Request(format!("parameter {path:?}: {why}"));
    let mut node = doc;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad("empty path segment".into()));
    }
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last && !map.contains_key(*seg) {
                    // Optional fields may be absent from the normalized file.
                    map.insert(seg.to_string(), Value::Null);
                }
                map.get_mut(*seg).ok_or_else(|| bad(format!("no key {seg:?}")))?
            }
            Value::Array(items) => {
                let idx = match seg.parse::<usize>() {
                    Ok(k) => Some(k),
                    Err(_) => items.iter().position(|item| element_name(item).as_deref() == Some(*seg)),
                };
                let idx = idx.filter(|k| *k < items.len()).ok_or_else(|| bad(format!("no element {seg:?}")))?;
                &mut items[idx]
            }
            _ => return Err(bad(format!("{seg:?} is below a scalar"))),
        };
    }
    match node {
        Value::Number(_) | Value::Null => {
            *node = serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| bad(format!("value {value} is not finite")))?;
            Ok(())
        }
        other => Err(bad(format!("target is not numeric ({other})"))),
    }
}

fn element_name(item: &Value) -> Option<String> {
    if let Some(id) = item.get("id").and_then(Value::as_str) {
        return Some(id.to_string());
    }
    match (item.get("a").and_then(Value::as_str), item.get("b").and_then(Value::as_str)) {
        (Some(a), Some(b)) => Some(format!("{a}-{b}")),
        _ => None,
    }
}

/// Variants of `scenario` with `path` set to each value, validated.
pub fn sweep_scenarios(scenario: &Scenario, path: &str, values: &[f64]) -> Result<Vec<Scenario>, EngineError> {
    let base = serde_json::to_value(&scenario.file).expect("scenario serializes");
    values
        .iter()
        .map(|&v| {
            let mut doc = base.clone();
            set_parameter(&mut doc, path, v)?;
            load_scenario(&doc.to_string())
        })
        .collect()
}

/// Run one variant per value in parallel. Run `i` uses seed `seed + i`;
/// results come back in input order.
pub fn sweep(scenario: &Scenario, path: &str, values: &[f64], seed: u64) -> Result<Vec<SimReport>, EngineError> {
    let variants = sweep_scenarios(scenario, path, values)?;
    variants
        .par_iter()
        .enumerate()
        .map(|(i, s)| run(s, seed.wrapping_add(i as u64)))
        .collect()
}
