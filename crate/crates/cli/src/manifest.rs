use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<InputFile>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

pub struct Recorder {
    started: Instant,
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(command: &str, argv: Vec<String>) -> Self {
        Self {
            started: Instant::now(),
            manifest: RunManifest {
                tool: "admd",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                argv,
                inputs: Vec::new(),
                config: serde_json::Value::Null,
                seed: None,
                outputs: Vec::new(),
                wall_clock_seconds: 0.0,
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let data = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.manifest.inputs.push(InputFile {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: Sha256::digest(&data).iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    pub fn config(&mut self, config: impl Serialize, seed: Option<u64>) {
        self.manifest.config = serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        self.manifest.seed = seed;
    }

    pub fn output(&mut self, path: PathBuf) {
        self.manifest.outputs.push(path);
    }

    pub fn finish(mut self, dir: &Path) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Input(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}
