use std::fs::File;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;
use sbne_core::persist::atomic_write;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

/// Written once per output directory as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Effective configuration after all precedence rules.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub timings: Vec<PhaseTiming>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            seed,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Runs `f`, recording its wall-clock time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(PhaseTiming {
            phase: phase.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut hasher = Sha256::new();
    io::copy(&mut File::open(path)?, &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)?;
    Ok(())
}
