use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::train::{LayerCurve, MemoryLedger, TrainConfig};

pub const SCHEMA_VERSION: &str = "1";

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schema_version: String,
    /// Fully resolved configuration.
    pub config: TrainConfig,
    pub curves: Vec<LayerCurve>,
    /// `accuracy` for node tasks, `roc_auc` for link tasks.
    pub metric: String,
    pub val_metric: f64,
    pub test_metric: f64,
    pub memory: MemoryLedger,
    /// SHA-256 over the trained layers, in order.
    pub model_fingerprint: String,
    pub seed: u64,
    /// Not covered by determinism comparisons.
    pub wall_clock_seconds: f64,
}

/// Scores of a saved model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub config: TrainConfig,
    pub metric: String,
    pub val_metric: f64,
    pub test_metric: f64,
    pub model_fingerprint: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize, out: &mut String| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().expect("f64 number");
                out.push_str(&format!("{x:.16e}"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(indent + 2, out);
                write_value(item, indent + 2, out);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                pad(indent + 2, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*key], indent + 2, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

/// Canonical text: sorted keys, two-space indentation, floats with 17
/// significant digits, non-finite floats as `null`, LF line endings.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn write_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_canonical_json(report)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_form() {
        let v = json!({"b": 1, "a": [0.1, 2.0, -3], "c": {"z": null, "y": "x\ty"}});
        let text = to_canonical_json(&v).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [\n    1.0000000000000001e-1,\n    2.0000000000000000e0,\n    -3\n  ],\n  \"b\": 1,\n  \"c\": {\n    \"y\": \"x\\ty\",\n    \"z\": null\n  }\n}\n"
        );
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let xs = vec![0.1 + 0.2, 1e-300, -7.25e17, f64::MIN_POSITIVE, 1.0 / 3.0];
        let back: Vec<f64> = serde_json::from_str(&to_canonical_json(&xs).unwrap()).unwrap();
        assert_eq!(back, xs);
    }
}
