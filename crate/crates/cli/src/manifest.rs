// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::CliError;
use crate::io::{digest_file, write_atomic};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub digest: String,
}

/// Sidecar record describing how an output was produced.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub version: String,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    params: serde_json::Value,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    seed: Option<u64>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, params: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            params,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputDigest { path: path.display().to_string(), digest: digest_file(path)? });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Writes `<primary>.manifest.json` next to the primary output.
    pub fn finish(self, primary: &Path) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: self.command,
            params: self.params,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = sidecar(primary, "manifest.json");
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        text.push(b'\n');
        write_atomic(&path, &text)?;
        Ok(path)
    }
}

/// `<path>.<suffix>`, keeping the original file name intact.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}
