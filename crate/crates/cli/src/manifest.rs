use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run, written as `manifest.json` in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    /// Input path to SHA-256 hex digest.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    pub started_unix_secs: u64,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, flags: serde_json::Value, seed: u64, elapsed: Duration) -> Self {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        RunManifest {
            subcommand: subcommand.to_string(),
            flags,
            inputs: BTreeMap::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            started_unix_secs: now.saturating_sub(elapsed).as_secs(),
            duration_secs: elapsed.as_secs_f64(),
        }
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
