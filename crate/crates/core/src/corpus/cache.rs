//! Content-addressed cache for LLM completions.
//!
//! Keys are SHA-256 digests over the backend identity, model, rendered
//! messages, and every sampling parameter, so any change to a request
//! produces a new key. Entries live one-per-file under the workspace
//! `cache/` directory and are written with temp-file-then-rename so
//! concurrent writers of the same key never interleave.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A cached completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub value: String,
    pub created_at: u64,
}

/// Deterministic cache key over everything that shapes a completion.
pub fn cache_key(
    backend_id: &str,
    model_id: &str,
    rendered_messages: &str,
    params_fingerprint: &str,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(backend_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(model_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(rendered_messages.as_bytes());
    hasher.update([0u8]);
    hasher.update(params_fingerprint.as_bytes());
    hex_digest(hasher)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_digest(hasher)
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// File-backed cache store rooted at one directory.
#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

impl CacheStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CacheStore { dir: dir.into() }
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Look a key up. Corrupt entries are treated as absent with a warning.
    pub fn get(&self, key: &str) -> Option<String> {
        let path = self.entry_path(key);
        let raw = fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CacheEntry>(&raw) {
            Ok(entry) if entry.key == key => Some(entry.value),
            Ok(entry) => {
                log::warn!(
                    "cache entry {} carries mismatched key {}; ignoring",
                    path.display(),
                    entry.key
                );
                None
            }
            Err(err) => {
                log::warn!("corrupt cache entry {}: {err}; ignoring", path.display());
                None
            }
        }
    }

    /// Store a value. Re-putting an identical value leaves the file untouched
    /// so repeated runs stay byte-identical.
    pub fn put(&self, key: &str, value: &str) -> Result<()> {
        if self.get(key).as_deref() == Some(value) {
            return Ok(());
        }
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let entry = CacheEntry {
            key: key.to_string(),
            value: value.to_string(),
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let body = serde_json::to_string(&entry)
            .map_err(|e| Error::validation(format!("cache entry serialization: {e}")))?;
        atomic_write(&self.entry_path(key), body.as_bytes())
    }
}

/// Write via temp file in the same directory, then rename over the target.
/// Temp names carry the pid and a process-wide counter so concurrent
/// writers of the same target never share one.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static WRITE_SERIAL: AtomicU64 = AtomicU64::new(0);

    let dir = path
        .parent()
        .ok_or_else(|| Error::validation(format!("path {} has no parent", path.display())))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}-{}",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".to_string()),
        std::process::id(),
        WRITE_SERIAL.fetch_add(1, Ordering::Relaxed)
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
