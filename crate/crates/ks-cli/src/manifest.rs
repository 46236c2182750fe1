//! Post-run manifest: which command ran, with what setup, and which files
//! it wrote. The manifest lands as `manifest.toml` next to the outputs and
//! goes through a temporary file plus rename, so a reader never sees a torn
//! manifest beside finished data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::RunConfig;
use crate::errors::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Crate version at build time, for provenance of stored artifacts.
    pub version: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// completed, converged, blowup_suspected or resolution_lost.
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_event: Option<f64>,
    /// Every data file the run wrote, relative to this manifest.
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            started_unix: now(),
            finished_unix: 0,
            verdict: "completed".into(),
            t_event: None,
            outputs: Vec::new(),
            flags: BTreeMap::new(),
            config: None,
        }
    }

    /// Records one written file by its name inside the output directory.
    pub fn push_output(&mut self, path: &Path) {
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.push(name);
    }

    pub fn flag(&mut self, key: &str, value: impl ToString) {
        self.flags.insert(key.into(), value.to_string());
    }

    /// Finalizes the timestamps and writes `manifest.toml` in `dir`.
    pub fn write(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        self.finished_unix = now();
        self.outputs.sort();
        let body = toml::to_string_pretty(&self)
            .map_err(|e| CliError::Config(format!("manifest serialization failed: {e}")))?;
        let tmp = dir.join("manifest.toml.tmp");
        let path = dir.join("manifest.toml");
        fs::write(&tmp, body)?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn written_manifest_parses_and_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("eta", 7);
        m.push_output(&dir.path().join("eta.csv"));
        m.flag("taus", "1,3,10");
        let path = m.write(dir.path()).unwrap();
        assert!(!dir.path().join("manifest.toml.tmp").exists());
        let parsed: toml::Value = toml::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(parsed["command"].as_str(), Some("eta"));
        assert_eq!(parsed["seed"].as_integer(), Some(7));
        assert_eq!(parsed["outputs"][0].as_str(), Some("eta.csv"));
        assert_eq!(parsed["flags"]["taus"].as_str(), Some("1,3,10"));
    }
}
