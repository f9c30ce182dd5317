//! Run manifests and the checksummed output directory.

use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Outputs that are missing or whose contents no longer match.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter_map(|o| match fs::read(dir.join(&o.path)) {
                Ok(bytes) if sha256_hex(&bytes) == o.sha256 => None,
                Ok(_) => Some(format!("{}: checksum mismatch", o.path)),
                Err(e) => Some(format!("{}: {e}", o.path)),
            })
            .collect()
    }
}

/// A run directory that records a checksum for every file written to it.
pub struct OutputDir {
    root: PathBuf,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes a file under the root; `name` must be a plain relative path.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let rel = Path::new(name);
        if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("{name} is not a plain relative path"),
            ));
        }
        fs::write(self.root.join(rel), bytes)?;
        self.records.retain(|r| r.path != name);
        self.records.push(OutputRecord {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn finish(self, config_hash: String, seed: u64, wall_clock_seconds: f64) -> std::io::Result<RunManifest> {
        let manifest = RunManifest {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            wall_clock_seconds,
            outputs: self.records,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(self.root.join(MANIFEST_FILE), text + "\n")?;
        Ok(manifest)
    }
}
