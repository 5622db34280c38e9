use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one command run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn new(command: &str, config_digest: String, seed: Option<u64>, started_at: String) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_digest,
            seed,
            started_at,
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    /// Stamps the finish time and writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_at = now();
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}
