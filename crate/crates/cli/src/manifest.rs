//! Run manifest: every command records its inputs (by content hash), its
//! settings, and its outputs, so a run is reproducible bit-for-bit from the
//! manifest alone. No timestamps; identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use seismon::Result;

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub cli_version: String,
    pub lib_version: String,
    pub settings: serde_json::Value,
    /// Input path -> sha256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output file name -> sha256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

impl Manifest {
    pub fn new(command: &str, settings: serde_json::Value) -> Manifest {
        Manifest {
            command: command.to_string(),
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            lib_version: seismon::VERSION.to_string(),
            settings,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
