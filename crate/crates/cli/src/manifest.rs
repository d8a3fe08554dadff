use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Cli;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Record written next to every set of outputs; replaying it reproduces them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved invocation, including defaults and absolute input paths.
    pub options: Cli,
    pub seed: u64,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    /// Output path to SHA-256 of its bytes.
    pub outputs: BTreeMap<PathBuf, String>,
    pub duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub plot: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
