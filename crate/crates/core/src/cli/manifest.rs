//! Run manifests: what ran, on which bytes, producing which files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const MANIFEST_SUFFIX: &str = ".manifest.json";
/// Path recorded for data read from standard input.
pub const STDIN: &str = "-";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    /// Absolute paths, or `-` for standard input.
    pub inputs: Vec<FileDigest>,
    pub tool_version: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
    /// Relative to the manifest's directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_owned(),
            parameters,
            inputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&io::read_text(path)?).map_err(|e| Error::Parse {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        io::write_atomic(path, text.as_bytes())
    }

    /// Re-hashes every recorded file; stdin inputs cannot be checked and
    /// are skipped.
    pub fn verify(&self, manifest_path: &Path) -> Result<()> {
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let inputs = self.inputs.iter().filter(|d| d.path != Path::new(STDIN)).map(|d| (d.path.clone(), d));
        let outputs = self.outputs.iter().map(|d| (dir.join(&d.path), d));
        for (path, d) in inputs.chain(outputs) {
            let actual = digest_file(&path)?;
            if actual != d.sha256 {
                return Err(Error::StaleInput {
                    path,
                    expected: d.sha256.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}

/// Manifest files named in `paths`; directories contribute every
/// `*.manifest.json` inside them, sorted by name.
pub fn collect_manifests(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_str().is_some_and(|s| s.ends_with(MANIFEST_SUFFIX)))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no manifests found"));
    }
    Ok(out)
}
