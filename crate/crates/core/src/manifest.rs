//! Run manifests: enough metadata next to every output to reproduce it
//! bit-exactly (the recorded command line can be replayed verbatim).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    /// Full argument vector of the run, replayable via the `replay`
    /// subcommand.
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// sha256 of each input file, keyed by path as given.
    pub input_checksums: BTreeMap<String, String>,
    /// Output files this manifest accompanies.
    pub outputs: Vec<String>,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed: None,
            input_checksums: BTreeMap::new(),
            outputs: Vec::new(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        self.input_checksums.insert(
            path.display().to_string(),
            crate::ingestion::sha256_hex(&bytes),
        );
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}
