//! Output directory bookkeeping: hashed files, warnings, and the manifest.

use crate::Cli;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Bundle {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    warnings: Vec<String>,
    /// Set by a command that wrote its outputs but must exit nonzero.
    pub failure: Option<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), outputs: BTreeMap::new(), warnings: Vec::new(), failure: None })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Printed now and kept for the manifest.
    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Input {
    pub path: PathBuf,
    pub sha256: String,
    pub contents: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run: Cli,
    pub inputs: BTreeMap<String, Input>,
    pub warnings: Vec<String>,
    /// File name to SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    pub outcome: serde_json::Value,
}

impl Manifest {
    pub fn new(run: Cli) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            run,
            inputs: BTreeMap::new(),
            warnings: Vec::new(),
            outputs: BTreeMap::new(),
            outcome: serde_json::Value::Null,
        }
    }

    pub fn add_input(&mut self, role: &str, path: &Path, contents: String) {
        let sha256 = sha256_hex(contents.as_bytes());
        self.inputs.insert(role.to_string(), Input { path: path.to_path_buf(), sha256, contents });
    }

    /// Writes the manifest and turns a recorded failure into an error.
    pub fn finish(mut self, bundle: Bundle, outcome: serde_json::Value) -> Result<()> {
        self.warnings = bundle.warnings;
        self.outputs = bundle.outputs;
        self.outcome = outcome;
        let path = bundle.dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        match bundle.failure {
            Some(msg) => Err(crate::verification_failure(msg)),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
