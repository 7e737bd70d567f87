//! File writers. Every file carries a provenance block: tool name and version,
//! the SHA-256 of the configuration text, and the unit conventions. CSV files
//! carry it as leading `#` comment lines, JSON files as a `provenance` field.
//!
//! Floats are written with Rust's shortest round-trip formatting, so identical
//! inputs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Result;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Units {
    pub frequency: &'static str,
    pub power: &'static str,
    pub time: &'static str,
    pub temperature: &'static str,
    pub saturation_rates: &'static str,
}

pub const UNITS: Units = Units {
    frequency: "cyclic MHz (nu = omega/2pi)",
    power: "photons/ns",
    time: "ns",
    temperature: "K",
    saturation_rates: "angular",
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub units: Units,
}

impl Provenance {
    pub fn for_config(config_text: &str) -> Self {
        Self {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            config_sha256: sha256_hex(config_text.as_bytes()),
            units: UNITS,
        }
    }

    fn csv_header(&self) -> String {
        let u = &self.units;
        format!(
            "# tool: {} {}\n# config_sha256: {}\n# units: frequency {}; power {}; time {}; temperature {}; saturation rates {}\n",
            self.tool, self.version, self.config_sha256, u.frequency, u.power, u.time, u.temperature, u.saturation_rates
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in digest.iter() {
        write!(hex, "{b:02x}").unwrap();
    }
    hex
}

/// Writes files into one directory, stamping each with the same provenance.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    provenance: Provenance,
}

impl OutputDir {
    pub fn create(root: &Path, provenance: Provenance) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            provenance,
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// CSV with provenance comments, a header row and one line per row.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let mut text = self.provenance.csv_header();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// JSON object `{"provenance": ..., "data": ...}`.
    pub fn write_json<T: Serialize>(&self, name: &str, data: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            provenance: &'a Provenance,
            data: &'a T,
        }
        let mut text = serde_json::to_string_pretty(&Wrapped {
            provenance: &self.provenance,
            data,
        })?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Table written as CSV or as a JSON array of records with the same field names.
    pub fn write_table(&self, stem: &str, format: crate::config::Format, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        match format {
            crate::config::Format::Csv => self.write_csv(&format!("{stem}.csv"), header, rows),
            crate::config::Format::Json => {
                let records: Vec<serde_json::Map<String, serde_json::Value>> = rows
                    .iter()
                    .map(|row| {
                        header
                            .iter()
                            .zip(row)
                            .map(|(k, v)| (k.to_string(), json_number(*v)))
                            .collect()
                    })
                    .collect();
                self.write_json(&format!("{stem}.json"), &records)
            }
        }
    }
}

fn format_number(v: f64) -> String {
    if v == 0.0 || (v.is_finite() && (1e-4..1e15).contains(&v.abs())) {
        format!("{v}")
    } else if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}
