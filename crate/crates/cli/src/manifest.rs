use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use i2l_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

/// Record of one completed stage. Output paths are relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

/// Provenance of a run directory. Stages run under a different config hash are discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: String,
    pub config_hash: String,
    pub seed: u64,
    /// Width of the learner's feature matrix, once known.
    pub feature_count: Option<usize>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn hash_config(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl RunManifest {
    /// Loads the manifest in `dir` if it belongs to the same config, else starts afresh.
    pub fn open(dir: &Path, config_hash: &str, seed: u64) -> RunManifest {
        let existing = std::fs::read_to_string(dir.join(MANIFEST_FILE))
            .ok()
            .and_then(|t| serde_json::from_str::<RunManifest>(&t).ok())
            .filter(|m| m.config_hash == config_hash);
        existing.unwrap_or_else(|| RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: CONFIG_FILE.into(),
            config_hash: config_hash.into(),
            seed,
            feature_count: None,
            stages: BTreeMap::new(),
        })
    }

    /// True when `stage` completed under this config and its outputs still exist.
    pub fn is_current(&self, dir: &Path, stage: &str) -> bool {
        self.stages
            .get(stage)
            .is_some_and(|s| s.config_hash == self.config_hash && s.outputs.iter().all(|p| dir.join(p).exists()))
    }

    pub fn record(&mut self, stage: &str, started_unix: u64, outputs: Vec<String>) {
        let record =
            StageRecord { config_hash: self.config_hash.clone(), started_unix, finished_unix: now_unix(), outputs };
        self.stages.insert(stage.into(), record);
    }

    /// Writes the manifest after checking that every referenced path exists.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let missing = self.stages.values().flat_map(|s| &s.outputs).find(|p| !dir.join(p).exists());
        if let Some(p) = missing {
            return Err(Error::InvalidInput(format!("manifest references missing output {p}")));
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(hash_config(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn config_change_discards_stages() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x").unwrap();
        let mut m = RunManifest::open(dir.path(), "h1", 1);
        m.record("features", 0, vec!["a.csv".into()]);
        m.write(dir.path()).unwrap();
        assert!(RunManifest::open(dir.path(), "h1", 1).is_current(dir.path(), "features"));
        assert!(RunManifest::open(dir.path(), "h2", 1).stages.is_empty());
        std::fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(!RunManifest::open(dir.path(), "h1", 1).is_current(dir.path(), "features"));
        assert!(m.write(dir.path()).is_err());
    }
}
