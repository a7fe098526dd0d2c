//! Result persistence: atomic file writes and the run manifest.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

/// Writes `dir/name` through a temporary sibling and a rename.
pub fn write_atomic(dir: &Path, name: &str, data: &[u8]) -> Result<OutputFile> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, data).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, &path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(OutputFile { name: name.to_string(), bytes: data.len(), sha256: sha256_hex(data) })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub seed: u64,
    pub toolkit_version: String,
    pub started: String,
    pub finished: String,
    pub threads: usize,
    /// Resolved parameters, defaults included.
    pub config: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub bound_violations: Vec<String>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
