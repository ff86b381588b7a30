//! Run configuration: a TOML document whose values command-line flags may
//! override. The resolved value is what the manifest hash covers.

use std::path::{Path, PathBuf};

use dived_core::{RetryPolicy, SliceSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub max_in_flight: usize,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            endpoint: None,
            model: None,
            max_in_flight: 4,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub per_event: usize,
    pub expand_count: usize,
    pub regenerate: u32,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            per_event: 10,
            expand_count: 10,
            regenerate: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruningConfig {
    pub threshold: f64,
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            threshold: dived_core::pruning::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyConfig {
    pub n_events: usize,
    pub n_definitions: usize,
    pub n_samples: usize,
    pub n_negatives: usize,
    pub n_hard_negatives: usize,
    pub with_ontology: bool,
    pub with_definition: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        let s = SliceSpec::default();
        AssemblyConfig {
            n_events: s.n_events,
            n_definitions: s.n_definitions,
            n_samples: s.n_samples,
            n_negatives: s.n_negatives,
            n_hard_negatives: s.n_hard_negatives,
            with_ontology: s.with_ontology,
            with_definition: s.with_definition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seeds the mock backend and assembly sampling.
    pub seed: i64,
    /// Directory with template and in-context example overrides.
    pub templates: Option<PathBuf>,
    pub backend: BackendConfig,
    pub curation: CurationConfig,
    pub pruning: PruningConfig,
    pub assembly: AssemblyConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn slice_spec(&self) -> SliceSpec {
        let a = &self.assembly;
        SliceSpec {
            n_events: a.n_events,
            n_definitions: a.n_definitions,
            n_samples: a.n_samples,
            n_negatives: a.n_negatives,
            n_hard_negatives: a.n_hard_negatives,
            with_ontology: a.with_ontology,
            with_definition: a.with_definition,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.backend.max_in_flight == 0 {
            return Err(ConfigError::Invalid(
                "backend.max_in_flight must be positive".into(),
            ));
        }
        if self.backend.kind == BackendKind::Http {
            if self.backend.endpoint.is_none() {
                return Err(ConfigError::Invalid(
                    "the http backend needs backend.endpoint".into(),
                ));
            }
            if self.backend.model.is_none() {
                return Err(ConfigError::Invalid(
                    "the http backend needs backend.model".into(),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
