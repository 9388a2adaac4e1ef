//! Reproducibility manifests written alongside command outputs.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Result;

/// Record of one command invocation: equal `config_hash` and `seed` must
/// reproduce byte-identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub input_paths: Vec<String>,
    pub output_paths: Vec<String>,
    pub wall_time_s: f64,
    /// Scenario-specific metadata (emitter count, efficiencies, ...).
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        RunManifest {
            config_hash,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_paths: Vec::new(),
            output_paths: Vec::new(),
            wall_time_s: 0.0,
            extra: serde_json::Map::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| crate::error::Error::Format(format!("manifest {}: {e}", path.display())))
    }
}

/// Hex SHA-256 of raw bytes, used to fingerprint configuration files.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        // sha256("abc")
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let mut m = RunManifest::new("deadbeef".into(), 42);
        m.output_paths.push("out.csv".into());
        m.save(&path).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.config_hash, "deadbeef");
        assert_eq!(back.seed, 42);
        assert_eq!(back.output_paths, vec!["out.csv".to_string()]);
    }
}
