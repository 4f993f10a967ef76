//! Run manifests: the config, seed, versions and content hashes of outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SCHEMA_VERSION};

pub const MANIFEST_VERSION: u32 = 1;

/// SHA-256 over a git-style blob header and the content.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    config_sha256: String,
    seed: u64,
    versions: serde_json::Value,
    outputs: Vec<OutputEntry>,
}

pub fn write_manifest(out: &Path, command: &str, cfg: &RunConfig, outputs: &[PathBuf]) -> std::io::Result<PathBuf> {
    let cfg_json = serde_json::to_vec(cfg)?;
    let mut entries = Vec::new();
    for p in outputs {
        let bytes = std::fs::read(p)?;
        let name = p.strip_prefix(out).unwrap_or(p).display().to_string();
        entries.push(OutputEntry { file: name, sha256: content_hash(&bytes) });
    }
    let m = Manifest {
        manifest_version: MANIFEST_VERSION,
        command,
        config: cfg,
        config_sha256: content_hash(&cfg_json),
        seed: cfg.seed,
        versions: serde_json::json!({
            "disloc": env!("CARGO_PKG_VERSION"),
            "config_schema": SCHEMA_VERSION,
            "parallel": cfg!(feature = "parallel"),
        }),
        outputs: entries,
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&m)?)?;
    Ok(path)
}
