//! Deterministic artifact emission: every float in a JSON report is
//! rewritten to a fixed 17-significant-digit literal so identical runs
//! produce byte-identical files, and all writes go through a temp file
//! plus rename.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                return;
            }
            let f = n.as_f64().unwrap_or(f64::NAN);
            if f.is_finite() {
                let lit = format!("{f:.16e}");
                *v = Value::Number(
                    serde_json::from_str(&lit).expect("formatted float literal parses"),
                );
            } else {
                *v = Value::String(fmt_float(f));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).context("report serialization")?;
    canonicalize(&mut v);
    let mut text = serde_json::to_string_pretty(&v).context("report rendering")?;
    text.push('\n');
    Ok(text)
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents)
        .with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &canonical_json(value)?)
}

/// CSV with a header row; every cell already rendered by the caller.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_atomic(path, &text)
}

/// Sibling path with a different extension, for the JSON that accompanies
/// each CSV artifact (and vice versa).
pub fn with_ext(path: &Path, ext: &str) -> std::path::PathBuf {
    path.with_extension(ext)
}
