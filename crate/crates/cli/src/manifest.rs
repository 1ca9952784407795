//! Versioned JSONL manifests shared by every subcommand.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_MINOR: u32 = 0;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn schema_version() -> String {
    format!("{SCHEMA_MAJOR}.{SCHEMA_MINOR}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub schema_version: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub tool_version: String,
    pub config_fingerprint: String,
    pub payload: serde_json::Value,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("manifest line {line}: schema {found} is newer than supported major {SCHEMA_MAJOR}")]
    NewerMajor { line: usize, found: String },
    #[error("manifest line {line}: expected record type `{expected}`, found `{found}`")]
    WrongType { line: usize, expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn major_of(version: &str) -> Option<u32> {
    let (major, minor) = version.split_once('.')?;
    minor.parse::<u32>().ok()?;
    major.parse().ok()
}

/// Writes records with a fixed fingerprint; output is a pure function of the payloads.
pub struct ManifestWriter<W: Write> {
    out: W,
    fingerprint: String,
    records: usize,
}

impl<W: Write> ManifestWriter<W> {
    pub fn new(out: W, fingerprint: &str) -> Self {
        ManifestWriter {
            out,
            fingerprint: fingerprint.to_string(),
            records: 0,
        }
    }

    pub fn write<T: Serialize>(&mut self, kind: &str, payload: &T) -> std::io::Result<()> {
        let record = ManifestRecord {
            schema_version: schema_version(),
            kind: kind.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_fingerprint: self.fingerprint.clone(),
            payload: serde_json::to_value(payload).map_err(std::io::Error::other)?,
        };
        serde_json::to_writer(&mut self.out, &record).map_err(std::io::Error::other)?;
        self.out.write_all(b"\n")?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn create(path: &Path, fingerprint: &str) -> std::io::Result<ManifestWriter<std::io::BufWriter<std::fs::File>>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(ManifestWriter::new(std::io::BufWriter::new(std::fs::File::create(path)?), fingerprint))
}

pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ManifestRecord>, ManifestError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        // Check the version before the strict shape so newer schemas get the clearer error.
        let loose: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| ManifestError::Parse { line: n, reason: e.to_string() })?;
        let version = loose.get("schema_version").and_then(|v| v.as_str()).unwrap_or_default().to_string();
        match major_of(&version) {
            None => {
                return Err(ManifestError::Parse {
                    line: n,
                    reason: format!("bad schema_version `{version}`"),
                })
            }
            Some(m) if m > SCHEMA_MAJOR => return Err(ManifestError::NewerMajor { line: n, found: version }),
            Some(_) => {}
        }
        let record: ManifestRecord =
            serde_json::from_value(loose).map_err(|e| ManifestError::Parse { line: n, reason: e.to_string() })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_path(path: &Path) -> Result<Vec<ManifestRecord>, ManifestError> {
    read_records(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Payloads of every record of type `kind`; other record types are skipped.
pub fn payloads<T: DeserializeOwned>(records: &[ManifestRecord], kind: &str) -> Result<Vec<T>, ManifestError> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind == kind)
        .map(|(i, r)| {
            serde_json::from_value(r.payload.clone()).map_err(|e| ManifestError::Parse {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Payloads from a file that may be a manifest or plain JSONL of bare payloads.
pub fn read_payloads<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Vec<T>, ManifestError> {
    let text = std::fs::read_to_string(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let is_manifest = serde_json::from_str::<serde_json::Value>(first)
        .ok()
        .is_some_and(|v| v.get("schema_version").is_some() && v.get("payload").is_some());
    if is_manifest {
        let records = read_records(text.as_bytes())?;
        if let Some(r) = records.iter().enumerate().find(|(_, r)| r.kind != kind && !r.kind.ends_with("_summary")) {
            return Err(ManifestError::WrongType {
                line: r.0 + 1,
                expected: kind.to_string(),
                found: r.1.kind.clone(),
            });
        }
        return payloads(&records, kind);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| ManifestError::Parse {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_version_gate() {
        let mut w = ManifestWriter::new(Vec::new(), "abcd");
        w.write("thing", &serde_json::json!({"x": 1})).unwrap();
        let bytes = w.finish().unwrap();
        let records = read_records(bytes.as_slice()).unwrap();
        assert_eq!(records[0].kind, "thing");
        assert_eq!(records[0].config_fingerprint, "abcd");

        let newer_minor = format!(
            r#"{{"schema_version":"{SCHEMA_MAJOR}.9","type":"t","tool_version":"0","config_fingerprint":"f","payload":null}}"#
        );
        assert!(read_records(newer_minor.as_bytes()).is_ok());
        let newer_major = newer_minor.replace(&format!("\"{SCHEMA_MAJOR}.9\""), &format!("\"{}.0\"", SCHEMA_MAJOR + 1));
        assert!(matches!(read_records(newer_major.as_bytes()), Err(ManifestError::NewerMajor { line: 1, .. })));
        assert!(read_records(&b"{\"schema_version\":\"x\"}"[..]).is_err());
    }
}
