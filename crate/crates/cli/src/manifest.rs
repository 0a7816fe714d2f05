//! Output writer and run manifest.
//!
//! All files of a run go through one [`OutputSink`], which hashes each file
//! as it is written and finally stores `manifest_<command>.json` next to
//! them. Timestamps honour `SOURCE_DATE_EPOCH` so that a rerun can
//! reproduce the manifest byte for byte as well.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RawConfig;
use crate::error::{CliError, Context};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RawConfig,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub files: Vec<FileRecord>,
}

pub fn now_unix() -> u64 {
    if let Some(epoch) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
    {
        return epoch;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path, what: &str) -> impl FnOnce(std::io::Error) -> CliError {
    let context = format!("{what} {}", path.display());
    move |source| CliError::Io { context, source }
}

pub struct OutputSink {
    dir: PathBuf,
    files: Vec<FileRecord>,
    started: u64,
}

impl OutputSink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir, "creating"))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: now_unix(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(io_err(&path, "writing"))?;
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        qutrit_battery::io::write_csv_to(&mut buf, rows).context(|| format!("serializing {name}"))?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes the manifest and returns its path.
    pub fn finish(self, command: &str, config: &RawConfig) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            started_unix_s: self.started,
            finished_unix_s: now_unix(),
            files: self.files,
        };
        let path = self.dir.join(format!("manifest_{command}.json"));
        let mut buf = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Validation(e.to_string()))?;
        buf.push(b'\n');
        std::fs::write(&path, buf).map_err(io_err(&path, "writing"))?;
        Ok(path)
    }
}

/// Rehashes every file listed in a manifest. Returns the paths whose size
/// or digest no longer match.
pub fn verify_manifest(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path, "reading"))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut bad = Vec::new();
    for f in &manifest.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if bytes.len() as u64 == f.bytes && sha256_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    Ok(bad)
}
