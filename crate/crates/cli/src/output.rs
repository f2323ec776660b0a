//! Output plumbing: atomic file writes, CSV emission with metadata header
//! comments, and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Writes atomically (temp file + rename) so partially written outputs
/// never appear under the final name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Config(format!("write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Config(format!("rename to {}: {e}", path.display())))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialize {}: {e}", path.display())))?;
    body.push('\n');
    write_atomic(path, &body)
}

/// CSV with `# key: value` header comments carrying grid metadata.
pub struct CsvWriter {
    body: String,
}

impl CsvWriter {
    pub fn new() -> Self {
        Self { body: String::new() }
    }

    pub fn comment(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.body, "# {key}: {value}");
        self
    }

    pub fn header(&mut self, columns: &[&str]) -> &mut Self {
        let _ = writeln!(self.body, "{}", columns.join(","));
        self
    }

    pub fn row(&mut self, values: &[f64]) -> &mut Self {
        let formatted: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(self.body, "{}", formatted.join(","));
        self
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.body)
    }
}

/// Provenance record written alongside every run's outputs.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub master_seed: u64,
    pub output_dir: String,
    pub tool_version: String,
    pub timestamp_utc: String,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, master_seed: u64, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.display().to_string(),
            master_seed,
            output_dir: out_dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_utc: unix_timestamp(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

fn unix_timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{now}")
}
