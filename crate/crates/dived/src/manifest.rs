//! Run manifests written next to every output file as
//! `<output>.manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{self, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    /// Digest of the input's own manifest, when it has one.
    pub manifest_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: i64,
    pub input_paths: Vec<String>,
    pub output_paths: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    pub timestamp: String,
    pub inputs: Vec<InputDigest>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seed: i64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            input_paths: Vec::new(),
            output_paths: Vec::new(),
            counts: BTreeMap::new(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), FormatError> {
        let mpath = manifest_path(path);
        let manifest_sha256 = if mpath.is_file() {
            Some(io::sha256_file(&mpath)?)
        } else {
            None
        };
        self.input_paths.push(path.display().to_string());
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: io::sha256_file(path)?,
            manifest_sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.output_paths.push(path.display().to_string());
    }

    pub fn count(&mut self, key: &str, value: usize) {
        self.counts.insert(key.to_string(), value as u64);
    }

    /// Writes one copy of the manifest per output path.
    pub fn write_all(&self) -> Result<(), FormatError> {
        for out in &self.output_paths {
            io::write_json(&manifest_path(Path::new(out)), self)?;
        }
        Ok(())
    }
}
