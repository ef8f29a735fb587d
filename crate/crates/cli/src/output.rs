//! Atomic file output and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Record of one invocation. Re-running `argv` reproduces every output.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub grid: Option<serde_json::Value>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub argv: Vec<String>,
}

/// Collects the outputs of a run and writes them together with the manifest.
pub struct Run {
    command: String,
    parameters: serde_json::Value,
    argv: Vec<String>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    grid: Option<serde_json::Value>,
    start: Instant,
}

impl Run {
    pub fn new(command: &str, parameters: impl Serialize, argv: &[String]) -> Self {
        Run {
            command: command.to_owned(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            argv: argv.to_vec(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            grid: None,
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn grid(&mut self, grid: impl Serialize) {
        self.grid = serde_json::to_value(grid).ok();
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes the manifest to `path`, or next to the first output.
    pub fn finish(self, path: Option<&Path>) -> Result<()> {
        let target = match (path, self.outputs.first()) {
            (Some(p), _) => p.to_path_buf(),
            (None, Some(first)) => {
                let mut name = first.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
            (None, None) => return Ok(()),
        };
        let m = RunManifest {
            command: self.command,
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            grid: self.grid,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            argv: self.argv,
        };
        write_atomic(&target, serde_json::to_string_pretty(&m)?.as_bytes())
    }
}
