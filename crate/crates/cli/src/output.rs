//! Artifact writing. Every JSON and CSV artifact carries the format version
//! and config hash; `<command>.run.json` lists all artifacts with their
//! digests. Wall-clock times go only to `<command>.timing.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nvreadout::dynamics::sha256_hex;
use serde::Serialize;

use crate::error::CliError;

/// Version of the CLI's JSON/CSV artifact layout.
pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    config_hash: &'a str,
    command: &'a str,
    result: &'a T,
}

#[derive(Serialize)]
struct ArtifactEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    format_version: u32,
    config_hash: &'a str,
    command: &'a str,
    artifacts: &'a [ArtifactEntry],
}

pub struct Output {
    dir: PathBuf,
    command: String,
    config_hash: String,
    artifacts: Vec<ArtifactEntry>,
    started: SystemTime,
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Output {
    /// Creates the output directory. Call only after the config has been validated.
    pub fn create(dir: &Path, command: &str, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            artifacts: Vec::new(),
            started: SystemTime::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.record(name, bytes);
        Ok(())
    }

    /// Registers a file written by someone else.
    pub fn register(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        self.record(name, &bytes);
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(ArtifactEntry { file: name.to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        let envelope = Envelope { format_version: ARTIFACT_FORMAT_VERSION, config_hash: &self.config_hash, command: &self.command, result };
        let text = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::Other(e.to_string()))? + "\n";
        self.write_bytes(name, text.as_bytes())
    }

    /// CSV with a leading `#` provenance line.
    pub fn write_csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> nvreadout::Result<()>) -> Result<(), CliError> {
        let mut bytes = format!(
            "# nvreadout {} format_version={} config_hash={}\n",
            self.command, ARTIFACT_FORMAT_VERSION, self.config_hash
        )
        .into_bytes();
        body(&mut bytes)?;
        self.write_bytes(name, &bytes)
    }

    /// Writes the run manifest and the timing sidecar.
    pub fn finish(self) -> Result<(), CliError> {
        let manifest = RunManifest {
            format_version: ARTIFACT_FORMAT_VERSION,
            config_hash: &self.config_hash,
            command: &self.command,
            artifacts: &self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Other(e.to_string()))? + "\n";
        let path = self.path(&format!("{}.run.json", self.command));
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;

        let finished = SystemTime::now();
        let timing = serde_json::json!({
            "started_unix": unix_seconds(self.started),
            "finished_unix": unix_seconds(finished),
            "elapsed_seconds": finished.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        });
        let path = self.path(&format!("{}.timing.json", self.command));
        fs::write(&path, timing.to_string() + "\n").map_err(|e| CliError::io(&path, e))
    }
}
