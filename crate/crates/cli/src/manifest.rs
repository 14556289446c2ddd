//! Run manifests: what was run, on which bytes, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use hellinger_core::json::FORMAT_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    /// Command line after the program name; `hellinger replay` re-runs it.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub hellinger: String,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], config: serde_json::Value) -> Self {
        RunManifest {
            format_version: FORMAT_VERSION,
            command: command.into(),
            args: args.to_vec(),
            config,
            inputs: Vec::new(),
            seed: None,
            versions: Versions { hellinger: env!("CARGO_PKG_VERSION").into() },
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputHash { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(FILE), self)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = read_input(path)?;
        let m: RunManifest = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if m.format_version != FORMAT_VERSION {
            return Err(CliError::usage(format!(
                "{}: format_version {} (expected {FORMAT_VERSION})",
                path.display(),
                m.format_version
            )));
        }
        Ok(m)
    }

    /// Fails if any recorded input changed since the run.
    pub fn verify_inputs(&self) -> CliResult<()> {
        for i in &self.inputs {
            let now = sha256_hex(&read_input(Path::new(&i.path))?);
            if now != i.sha256 {
                return Err(CliError::usage(format!("{} changed since the recorded run", i.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

pub fn create_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}
