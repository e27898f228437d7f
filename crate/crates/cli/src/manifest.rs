use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use signa::SignaError;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<FileRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_config: Option<serde_json::Value>,
    pub seed: u64,
    pub threads: usize,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

pub fn hash_file(path: &Path) -> signa::Result<FileRecord> {
    let bytes = fs::read(path).map_err(|e| SignaError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

impl RunManifest {
    pub fn start(command: &str, seed: u64, threads: usize) -> Self {
        RunManifest {
            command: command.into(),
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            config_path: None,
            effective_config: None,
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
        }
    }

    pub fn config(&mut self, path: &Path, effective: serde_json::Value) -> signa::Result<()> {
        self.config_path = Some(hash_file(path)?);
        self.effective_config = Some(effective);
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> signa::Result<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    /// Records a written artifact. Reading it back to hash it also checks
    /// that the write landed.
    pub fn output(&mut self, path: &Path) -> signa::Result<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> signa::Result<()> {
        self.finished_unix_ms = now_ms();
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(path, text).map_err(|e| SignaError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
