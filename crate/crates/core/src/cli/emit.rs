//! Report emission: canonical config hashing, JSON serialization with
//! 17-significant-digit floats (round-trip exact), and the per-charge CSV
//! tables. Reports are byte-identical across repeated runs and across worker
//! counts.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::charge::ChargeReport;
use crate::verify::VerificationReport;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("io error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub workers: usize,
    /// Only present when explicitly requested; byte-identical reports are
    /// the default contract.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub meta: RunMeta,
    pub charges: Vec<ChargeReport>,
    pub verifications: Vec<VerificationReport>,
}

/// Semantic hash of a config: JSON parsed, objects key-sorted, every number
/// rendered as a canonical 17-significant-digit float. Key order in the file
/// is irrelevant; any semantic change alters the hash.
pub fn config_hash(text: &str) -> Result<String, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let mut canonical = String::new();
    write_canonical(&value, &mut canonical);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

fn write_canonical(value: &serde_json::Value, out: &mut String) {
    match value {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            let f = n.as_f64().unwrap_or(f64::NAN);
            out.push_str(&format_sig17(f));
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serializes"));
        }
        serde_json::Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            // serde_json's map is BTree-backed (sorted) by default; iterate
            // sorted explicitly to stay immune to feature changes.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("key serializes"));
                out.push(':');
                write_canonical(&map[*key], out);
            }
            out.push('}');
        }
    }
}

/// 17 significant digits; exact round-trip for f64.
pub fn format_sig17(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    format!("{v:.16e}")
}

/// serde_json formatter that renders every f64 with 17 significant digits.
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        writer.write_all(format_sig17(value).as_bytes())
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

/// CSV table of one charge report. Columns exactly:
/// radius, integral, quad_error, extrapolated (running estimate; empty until
/// three radii are available).
pub fn charge_csv(report: &ChargeReport) -> String {
    let mut out = String::from("radius,integral,quad_error,extrapolated\n");
    for k in 0..report.radii.len() {
        let extr = report
            .running_extrapolation
            .get(k)
            .copied()
            .flatten()
            .map(|v| format_sig17(v))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_sig17(report.radii[k]),
            format_sig17(report.integrals[k]),
            format_sig17(report.quad_errors[k]),
            extr
        ));
    }
    out
}

/// Write the bundle: report.json plus one CSV per charge report.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<Vec<String>, EmitError> {
    std::fs::create_dir_all(dir).map_err(|e| EmitError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut written = Vec::new();
    let json_path = dir.join("report.json");
    let mut payload = to_json_string(bundle)?;
    payload.push('\n');
    write_file(&json_path, payload.as_bytes())?;
    written.push(json_path.display().to_string());
    for (k, charge) in bundle.charges.iter().enumerate() {
        let name = format!("charge_{k}_{}.csv", sanitize(&charge.potential));
        let path = dir.join(name);
        write_file(&path, charge_csv(charge).as_bytes())?;
        written.push(path.display().to_string());
    }
    Ok(written)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EmitError> {
    let mut f = std::fs::File::create(path).map_err(|e| EmitError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(bytes).map_err(|e| EmitError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
