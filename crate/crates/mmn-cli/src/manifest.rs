//! Run manifests: every successful command records what it ran with and
//! what it wrote, making runs replayable.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub inputs: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub duration_seconds: f64,
}

pub struct ManifestBuilder {
    command: &'static str,
    seed: Option<u64>,
    inputs: serde_json::Map<String, serde_json::Value>,
    outputs: Vec<PathBuf>,
    config: serde_json::Value,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str) -> Self {
        ManifestBuilder {
            command,
            seed: None,
            inputs: serde_json::Map::new(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            started: Instant::now(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.to_string(), serde_json::json!(path));
        self
    }

    pub fn config<C: Serialize>(mut self, config: &C) -> Self {
        self.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest itself as the final output.
    pub fn write(self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            inputs: serde_json::Value::Object(self.inputs),
            outputs: self.outputs,
            config: self.config,
            duration_seconds: self.started.elapsed().as_secs_f64(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}
