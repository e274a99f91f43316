//! The manifest written into every output directory, with checksums of
//! everything else in it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bnls::timestepper::HaltReason;

use crate::error::{io_at, CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the directory holding the manifest.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub level: f64,
    pub focusing: f64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<HaltReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub archive: Vec<ArchiveEntry>,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(io_at(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            wall_seconds: 0.0,
            halt: None,
            message: None,
            archive: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records `path` (inside `dir`) with its current checksum.
    pub fn add_output(&mut self, dir: &Path, path: &Path) -> CliResult<()> {
        let rel = path.strip_prefix(dir).unwrap_or(path);
        let name = rel.to_string_lossy().into_owned();
        let sha256 = sha256_file(&dir.join(rel))?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputFile { path: name, sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(io_at(&path))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(io_at(&path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Corrupt { path, message: e.to_string() })
    }

    /// Every listed file exists and matches its checksum.
    pub fn verify(&self, dir: &Path) -> CliResult<()> {
        for out in &self.outputs {
            let path = dir.join(&out.path);
            let actual = sha256_file(&path)?;
            if actual != out.sha256 {
                return Err(CliError::Checksum { path, expected: out.sha256.clone(), actual });
            }
        }
        Ok(())
    }

    pub fn lists(&self, path: &str) -> bool {
        self.outputs.iter().any(|o| o.path == path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_detect_changes() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.csv");
        fs::write(&file, "x\n1\n").unwrap();
        let mut m = RunManifest::new("test", serde_json::json!({"k": 1}));
        m.add_output(dir.path(), &file).unwrap();
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();
        fs::write(&file, "x\n2\n").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(CliError::Checksum { .. })));
        fs::remove_file(&file).unwrap();
        assert!(matches!(back.verify(dir.path()), Err(CliError::Io { .. })));
    }

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("abc");
        fs::write(&file, "abc").unwrap();
        assert_eq!(sha256_file(&file).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
