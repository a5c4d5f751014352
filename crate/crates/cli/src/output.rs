//! Output directory handling: atomic file writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL_NAME: &str = "geopulse";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Collects the files of one command run inside `dir`.
#[derive(Debug)]
pub struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn write_with(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let target = self.path(name);
        write_atomic(&target, &buf)?;
        self.written.push(name.to_string());
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write_with(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    /// Registers a file produced by another writer (for instance a waveform
    /// plus sidecar) so that it appears in the manifest.
    pub fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn write_manifest(&mut self, command: &str, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            tool: TOOL_NAME,
            version: TOOL_VERSION,
            command: command.to_string(),
            config_sha256: config_hash(cfg)?,
            seed: cfg.seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            files: self.written.clone(),
            config: cfg.clone(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

pub fn write_atomic(target: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = target.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, target).map_err(io_err(target))
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub timestamp_unix: u64,
    pub files: Vec<String>,
    /// Effective configuration after flag overrides.
    pub config: RunConfig,
}

/// SHA-256 of the effective configuration serialized as compact JSON.
pub fn config_hash(cfg: &RunConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
