use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::metrics::{EvalResult, LooResult};

/// One completed stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash over the stage's configuration slice and input artifact hashes.
    pub input_key: String,
    pub seconds: f64,
    pub seed: Option<u64>,
    /// Artifact path relative to the run directory, mapped to its sha256.
    pub artifacts: BTreeMap<String, String>,
    /// Free-form stage facts (epochs run, triplet counts, ...).
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub tag: String,
    pub k: usize,
    pub n: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub topn: Vec<EvalResult>,
    pub coverage: Vec<CoveragePoint>,
    pub loo: Vec<LooResult>,
}

/// Machine-readable record of a run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub dataset_sha256: Option<String>,
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(default)]
    pub metrics: Option<MetricsRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Hash of `artifact` as recorded by whichever stage produced it.
    pub fn artifact_hash(&self, artifact: &str) -> Option<(&str, &str)> {
        self.stages
            .iter()
            .find_map(|(stage, r)| r.artifacts.get(artifact).map(|h| (stage.as_str(), h.as_str())))
    }
}

/// Accumulates the identity of a stage's inputs.
#[derive(Debug, Clone, Default)]
pub struct StageKey(String);

impl StageKey {
    pub fn new(stage: &str) -> Self {
        Self(format!("stage={stage}\n"))
    }

    pub fn with(mut self, label: &str, value: impl std::fmt::Display) -> Self {
        self.0.push_str(&format!("{label}={value}\n"));
        self
    }

    pub fn text(mut self, block: &str) -> Self {
        self.0.push_str(block);
        self
    }

    pub fn finish(&self) -> String {
        sha256_hex(self.0.as_bytes())
    }
}
