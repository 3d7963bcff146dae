//! Provenance stamping and file writing shared by all commands.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "spottune";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Stamped into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the resolved configuration, as JSON.
    pub config_hash: String,
}

impl Provenance {
    pub fn new<T: Serialize>(seed: u64, resolved: &T) -> Self {
        let json = serde_json::to_vec(resolved).expect("configuration serializes");
        let digest = Sha256::digest(&json);
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed,
            config_hash,
        }
    }

    /// One-line form for CSV comment headers.
    pub fn comment(&self) -> String {
        format!("{} {} seed={} config={}", self.tool, self.version, self.seed, self.config_hash)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// CSV text with a leading provenance comment.
pub fn csv_text(prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# {}\n{}\n", prov.comment(), header.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
