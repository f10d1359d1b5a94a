use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub subcommand: String,
    /// Fully resolved configuration.
    pub config: Value,
    pub seeds: Vec<u64>,
    /// Written files, relative to the output directory.
    pub outputs: Vec<String>,
    pub version: String,
}

impl Manifest {
    pub fn new(subcommand: &str, config: Value, seeds: Vec<u64>, out: &Path, files: &[PathBuf]) -> Self {
        let outputs = files
            .iter()
            .map(|f| f.strip_prefix(out).unwrap_or(f).to_string_lossy().replace('\\', "/"))
            .collect();
        Self {
            subcommand: subcommand.to_string(),
            config,
            seeds,
            outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(out)?;
        let path = out.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path.display().to_string(), e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(path.display().to_string(), e.to_string()))
    }
}
