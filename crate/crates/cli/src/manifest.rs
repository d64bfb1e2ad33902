//! Run manifest: what a command did and digests of everything it wrote.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ResolvedDp, RunConfig};
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// Config as resolved (absolute data path, command-line overrides).
    pub config: RunConfig,
    pub rows: usize,
    pub dp: Option<ResolvedDp>,
    pub files: Vec<FileEntry>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    let digest = Sha256::digest(&bytes);
    let hex = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, bytes.len() as u64))
}

impl RunManifest {
    pub fn new(command: &str, config: RunConfig, rows: usize, dp: Option<ResolvedDp>) -> Self {
        Self {
            command: command.into(),
            status: RunStatus::Running,
            error: None,
            code_version: concat!("vflgan ", env!("CARGO_PKG_VERSION")).into(),
            started_unix: now(),
            finished_unix: None,
            config,
            rows,
            dp,
            files: Vec::new(),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(path.clone(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Json(path, e))
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Json(path.clone(), e))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(path, e))
    }

    /// Adds or refreshes the digest of `rel` (relative to `run_dir`).
    pub fn record(&mut self, run_dir: &Path, rel: &str) -> Result<()> {
        let (sha256, bytes) = sha256_file(&run_dir.join(rel))?;
        let entry = FileEntry {
            path: rel.into(),
            sha256,
            bytes,
        };
        match self.files.iter_mut().find(|f| f.path == rel) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn finish(&mut self, result: &Result<()>) {
        self.finished_unix = Some(now());
        match result {
            Ok(()) => self.status = RunStatus::Complete,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e.to_string());
            }
        }
    }

    /// Fails on the first listed file that is missing or altered.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        for f in &self.files {
            let path = run_dir.join(&f.path);
            if !path.exists() {
                return Err(CliError::Manifest(format!("{} is missing", f.path)));
            }
            let (sha, _) = sha256_file(&path)?;
            if sha != f.sha256 {
                return Err(CliError::Manifest(format!(
                    "{} does not match its recorded digest",
                    f.path
                )));
            }
        }
        Ok(())
    }

    pub fn file(&self, rel: &str) -> Option<&FileEntry> {
        self.files.iter().find(|f| f.path == rel)
    }
}

/// Creates the fixed run layout in `dir`, which must be absent or empty.
pub fn create_run_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        if entries.next().is_some() {
            return Err(CliError::DirtyOutput(dir.to_path_buf()));
        }
    }
    for sub in ["checkpoints", "logs", "reports"] {
        let p: PathBuf = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| CliError::Io(p, e))?;
    }
    Ok(())
}
