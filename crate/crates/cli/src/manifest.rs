//! Run manifests: what was run, with which resolved configuration and seeds,
//! and the sha256 of every artifact written.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Arguments after the subcommand, as given.
    pub argv: Vec<String>,
    pub cwd: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
    /// Digest of the non-timing content where artifacts carry wall-clock fields.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub determinism_digest: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects artifacts written into one output directory.
pub struct OutputDir {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(file);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(Artifact { file: file.to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    /// Writes `<command>.manifest.json` listing every artifact so far.
    pub fn finish(
        self,
        command: &'static str,
        config: serde_json::Value,
        seeds: Vec<u64>,
        determinism_digest: Option<String>,
    ) -> Result<PathBuf, CliError> {
        let argv: Vec<String> = std::env::args().collect();
        let after = argv.iter().position(|a| a == command).map_or(argv.len(), |i| i + 1);
        let manifest = Manifest {
            tool: "patchspec",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: argv[after..].to_vec(),
            cwd: std::env::current_dir().map(|p| p.display().to_string()).unwrap_or_default(),
            config,
            seeds,
            artifacts: self.artifacts,
            determinism_digest,
        };
        let path = self.dir.join(format!("{command}.manifest.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
