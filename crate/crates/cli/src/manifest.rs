use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Record of one run: what was asked, with which effective configuration,
/// on which inputs, producing which outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub version: String,
    pub timestamp: String,
}

/// Collects inputs and outputs while a command runs, then writes the
/// manifest next to the outputs.
pub struct Run {
    out: PathBuf,
    command: String,
    config: Value,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(out: &Path, command: &str, config: Value, seed: u64) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Self {
            out: out.to_path_buf(),
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes an output file and records it.
    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(p.display().to_string(), sha256_file(p)?);
        }
        let mut outputs = BTreeMap::new();
        for name in &self.outputs {
            outputs.insert(name.clone(), sha256_file(&self.out.join(name))?);
        }
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            inputs,
            outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let path = self.out.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
