//! Run manifests: the provenance record every output directory carries.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::{io_error, CliError, SCHEMA_VERSION};

/// File name of the manifest inside an output directory; artifacts
/// reference it by this relative name.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of one command invocation.
///
/// The deterministic outputs of a run are a pure function of
/// (`config`, `seed`, `tool_version`); the timestamps and measured
/// wall-clock columns are the only fields that vary between identical
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration, defaults expanded.
    pub config: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: String::from("edgegain"),
            tool_version: String::from(env!("CARGO_PKG_VERSION")),
            command: String::from(command),
            seed,
            config,
            started_unix: unix_now(),
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    /// Stamps the end time and output list, then writes the manifest.
    pub fn finish(mut self, dir: &Path, outputs: Vec<String>) -> Result<PathBuf, CliError> {
        self.finished_unix = unix_now();
        self.outputs = outputs;
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::Io(format!("serializing manifest: {e}")))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
