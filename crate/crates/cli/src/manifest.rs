//! Run manifest: config echo, constants, per-stage wall clock, failure stage
//! and the hash of every emitted artifact. Written even when a run fails.

use std::path::Path;

use anderson_core::io::{json_bytes, sha256_hex, ArtifactRecord};
use anderson_core::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ChecksFailed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: RunConfig,
    pub constants: serde_json::Value,
    pub status: Status,
    pub failure: Option<Failure>,
    /// One line per check, `PASS` or `FAIL` first.
    pub checks: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(MANIFEST_NAME), json_bytes(self)?)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let bytes = std::fs::read(dir.join(MANIFEST_NAME))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Names of artifacts whose file is missing or hashes differently.
    pub fn stale_artifacts(&self, dir: &Path) -> Vec<String> {
        self.artifacts
            .iter()
            .filter(|a| match std::fs::read(dir.join(&a.name)) {
                Ok(bytes) => sha256_hex(&bytes) != a.sha256,
                Err(_) => true,
            })
            .map(|a| a.name.clone())
            .collect()
    }
}
