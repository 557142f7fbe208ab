//! Per-run provenance: what ran, with which settings, on which inputs, and
//! what it produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Effective settings after merging the config file and flags.
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub seed: Option<u64>,
    /// Worker threads used; outputs do not depend on it.
    pub threads: usize,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the manifest, to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    pub status: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        io::require_file(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| crate::error::CliError::data(path.display().to_string(), e))
    }
}

/// Collects inputs and outputs while a command runs.
#[derive(Debug)]
pub struct Run {
    command: String,
    manifest_path: PathBuf,
    config: serde_json::Value,
    seed: Option<u64>,
    threads: usize,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    started_at: DateTime<Utc>,
}

impl Run {
    pub fn new(command: &str, manifest_path: PathBuf, threads: usize) -> Self {
        Self {
            command: command.to_string(),
            manifest_path,
            config: serde_json::Value::Null,
            seed: None,
            threads,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started_at: Utc::now(),
        }
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) {
        self.config = serde_json::to_value(config).expect("serializable config");
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Checks that `path` exists and records its digest.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        io::require_file(path)?;
        self.inputs.insert(path.display().to_string(), io::file_digest(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        io::write_atomic(path, bytes)?;
        let base = self.manifest_path.parent().unwrap_or(Path::new(""));
        let key = path.strip_prefix(base).unwrap_or(path).display().to_string();
        self.outputs.insert(key, io::sha256_hex(bytes));
        Ok(())
    }

    pub fn outputs(&self) -> &BTreeMap<String, String> {
        &self.outputs
    }

    /// Writes the manifest. Called on success and failure alike; `status`
    /// is "ok" or the error message.
    pub fn finish(self, status: &str) -> Result<RunManifest> {
        let compact = serde_json::to_vec(&self.config).expect("serializable config");
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: io::sha256_hex(&compact),
            config: self.config,
            seed: self.seed,
            threads: self.threads,
            inputs: self.inputs,
            outputs: self.outputs,
            status: status.to_string(),
            started_at: self.started_at,
            finished_at: Utc::now(),
        };
        io::write_atomic(&self.manifest_path, &io::json_bytes(&manifest))?;
        Ok(manifest)
    }
}

/// Manifest location for a command writing a single file: beside it, named
/// after it.
pub fn beside(out: &Path) -> PathBuf {
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{name}.manifest.json"))
}
