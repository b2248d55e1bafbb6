//! Output directory, artifact bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::settings::Settings;

pub struct InputRecord {
    pub path: PathBuf,
    pub label: u8,
    pub n_spectra: usize,
    pub n_points: usize,
}

pub struct Run {
    dir: PathBuf,
    command: &'static str,
    started: u64,
    artifacts: Vec<String>,
    inputs: Vec<InputRecord>,
    extra: serde_json::Map<String, Value>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Run {
    /// Creates the output directory. Call only after inputs are validated,
    /// so a bad invocation leaves nothing behind.
    pub fn start(dir: &Path, command: &'static str, inputs: Vec<InputRecord>) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            started: unix_now(),
            artifacts: Vec::new(),
            inputs,
            extra: serde_json::Map::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.artifacts.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: Value) -> Result<()> {
        let text = serde_json::to_string_pretty(&value)?;
        self.write(name, text + "\n")
    }

    /// Registers a file written by other means.
    pub fn record(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    /// Writes `manifest.json`. A failed run is marked `"status": "failed"`
    /// so any artifacts already on disk are recognizably partial.
    pub fn finish(mut self, settings: &Settings, error: Option<&anyhow::Error>) -> Result<()> {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|i| {
                json!({
                    "path": i.path.display().to_string(),
                    "label": i.label,
                    "n_spectra": i.n_spectra,
                    "n_points": i.n_points,
                })
            })
            .collect();
        let mut manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "settings": settings.used(),
            "inputs": inputs,
            "artifacts": self.artifacts,
            "started_unix": self.started,
            "finished_unix": unix_now(),
            "status": if error.is_some() { "failed" } else { "complete" },
        });
        if let Some(e) = error {
            manifest["error"] = Value::String(format!("{e:#}"));
        }
        let obj = manifest.as_object_mut().expect("manifest is an object");
        obj.append(&mut self.extra);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
