//! Run artifacts: CSV tables and the JSON manifest that ties them together.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// One output table, already rendered to cells. Numbers are formatted with
/// the shortest round-trip representation, so reruns with identical inputs
/// produce byte-identical files.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// Renders an optional value, leaving the cell empty where a point failed.
pub fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), String> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    writer
        .write_record(&table.header)
        .and_then(|()| {
            table
                .rows
                .iter()
                .try_for_each(|row| writer.write_record(row))
        })
        .and_then(|()| writer.flush().map_err(csv::Error::from))
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Provenance record written next to every experiment's CSV. The constants
/// digest pins which physical constants produced the numbers, and the config
/// echo records the fully resolved settings rather than the sparse input.
#[derive(Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub experiment: &'static str,
    pub seed: Option<u64>,
    pub wall_time_ms: u128,
    pub constants_sha256: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

/// SHA-256 of the canonical constants table, hex encoded.
pub fn constants_fingerprint() -> String {
    let mut hasher = Sha256::new();
    hasher.update(qdiss::constants::constants_table().as_bytes());
    format!("{:x}", hasher.finalize())
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), String> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| format!("cannot encode manifest: {e}"))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}
