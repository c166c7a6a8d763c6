//! Run manifests: resolved configuration plus SHA-256 hashes of all inputs
//! and outputs, sufficient to re-run a subcommand and verify byte-identical
//! artifacts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Fully resolved arguments of the run, enough to re-dispatch it.
    pub args: serde_json::Value,
    /// Input path -> SHA-256, as the paths were given on the command line.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) -> SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(subcommand: &str, version: &str, args: serde_json::Value) -> Self {
        Manifest {
            tool: "polycount".into(),
            version: version.into(),
            subcommand: subcommand.into(),
            args,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Records an output by its file name within the run's output directory.
    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .ok_or_else(|| Error::Data(format!("output path '{}' has no file name", path.display())))?
            .to_string_lossy()
            .to_string();
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }
}

/// Hex-encoded SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot hash '{}': {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Outcome of re-running a manifest and comparing output hashes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceReport {
    #[serde(rename = "match")]
    pub matches: bool,
    /// Inputs whose current hash differs from the recorded one.
    pub changed_inputs: Vec<String>,
    /// Outputs whose re-run hash differs from the recorded one.
    pub mismatched_outputs: Vec<String>,
    /// Outputs recorded in the manifest but absent from the re-run.
    pub missing_outputs: Vec<String>,
}

impl ReproduceReport {
    /// Compares recorded output hashes against files in `dir`.
    pub fn compare(manifest: &Manifest, dir: &Path, changed_inputs: Vec<String>) -> Result<Self> {
        let mut mismatched = Vec::new();
        let mut missing = Vec::new();
        for (name, expected) in &manifest.outputs {
            let path = dir.join(name);
            if !path.is_file() {
                missing.push(name.clone());
                continue;
            }
            if &sha256_file(&path)? != expected {
                mismatched.push(name.clone());
            }
        }
        Ok(ReproduceReport {
            matches: changed_inputs.is_empty() && mismatched.is_empty() && missing.is_empty(),
            changed_inputs,
            mismatched_outputs: mismatched,
            missing_outputs: missing,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_matches_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        std::fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn compare_flags_mismatch_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.json");
        std::fs::write(&out, b"{}").unwrap();
        let mut manifest = Manifest::new("test", "0.0.0", serde_json::Value::Null);
        manifest.record_output(&out).unwrap();
        manifest.outputs.insert("gone.json".into(), "00".into());

        let report = ReproduceReport::compare(&manifest, dir.path(), vec![]).unwrap();
        assert!(!report.matches);
        assert_eq!(report.missing_outputs, vec!["gone.json"]);
        assert!(report.mismatched_outputs.is_empty());

        std::fs::write(&out, b"{\"changed\":1}").unwrap();
        let report = ReproduceReport::compare(&manifest, dir.path(), vec![]).unwrap();
        assert_eq!(report.mismatched_outputs, vec!["a.json"]);
    }
}
