//! Deterministic serialization: fixed key order, 17 significant digits,
//! trailing newline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "Infinity".into()
    } else {
        "-Infinity".into()
    }
}

/// Renders any serializable value as canonical JSON: object keys sorted,
/// floats as 17-digit scientific literals, two-space indentation.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::config(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(f64::NAN);
                if x.is_finite() {
                    out.push_str(&fmt_f64(x));
                } else {
                    let _ = write!(out, "\"{}\"", fmt_f64(x));
                }
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
            for (i, item) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_value(item, indent + 1, out);
                if i + 1 < items.len() {
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
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push_str("{\n");
            for (i, (k, item)) in sorted.iter().enumerate() {
                pad(indent + 1, out);
                let _ = write!(out, "{}: ", Value::String((*k).clone()));
                write_value(item, indent + 1, out);
                if i + 1 < sorted.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes canonical JSON for `result` to `path`.
pub fn write_report<T: Serialize>(result: &T, path: &Path) -> Result<()> {
    let text = to_canonical_json(result)?;
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of the canonical JSON of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let text = to_canonical_json(value)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Builds a CSV document from a header and rows of already formatted cells.
pub fn csv_document(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Record of one command run: what was run, on which configuration, and
/// its results.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<T: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub results: T,
}

impl<T: Serialize> RunManifest<T> {
    pub fn new(command: &str, config_hash: &str, seed: u64, results: T) -> Self {
        RunManifest {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            results,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        zeta: f64,
        alpha: Vec<f64>,
        name: &'static str,
        count: usize,
    }

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.5), "-2.5000000000000000e0");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn canonical_json_sorts_keys_and_ends_with_newline() {
        let s = Sample {
            zeta: 1.0 / 3.0,
            alpha: vec![1.0, 2.0],
            name: "x",
            count: 3,
        };
        let text = to_canonical_json(&s).unwrap();
        assert!(text.ends_with("}\n"));
        let a = text.find("\"alpha\"").unwrap();
        let c = text.find("\"count\"").unwrap();
        let z = text.find("\"zeta\"").unwrap();
        assert!(a < c && c < z);
        assert!(text.contains("3.3333333333333331e-1"));
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["count"], 3);
        assert_eq!(text, to_canonical_json(&s).unwrap());
    }

    #[test]
    fn empty_csv_has_header_only() {
        let doc = csv_document(&["b", "c_b"], Vec::<Vec<String>>::new());
        assert_eq!(doc, "b,c_b\n");
    }
}
