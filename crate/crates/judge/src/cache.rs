//! Append-only critique cache, content-addressed on the request.
//!
//! The key hashes everything that determines the completion distribution:
//! prompt text, model name, sampling parameters, and the sample index.
//! Corrupt lines are skipped on load, so a damaged cache degrades to
//! misses instead of failing the run.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One cached completion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key_hash: String,
    pub prompt_sha: String,
    pub sample_index: usize,
    pub raw_text: String,
    pub timestamp: u64,
}

/// Content address of one sampled completion.
pub fn cache_key(
    prompt: &str,
    model_name: &str,
    temperature: f64,
    top_p: f64,
    sample_index: usize,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_name.as_bytes());
    hasher.update([0x1f]);
    hasher.update(format!("{temperature:?}").as_bytes());
    hasher.update([0x1f]);
    hasher.update(format!("{top_p:?}").as_bytes());
    hasher.update([0x1f]);
    hasher.update(sample_index.to_string().as_bytes());
    hasher.update([0x1f]);
    hasher.update(prompt.as_bytes());
    hex(&hasher.finalize())
}

/// Digest of the prompt alone, stored alongside each record.
pub fn prompt_sha(prompt: &str) -> String {
    hex(&Sha256::digest(prompt.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk JSONL cache with an in-memory index.
#[derive(Debug)]
pub struct CritiqueCache {
    path: PathBuf,
    entries: HashMap<String, String>,
}

impl CritiqueCache {
    /// Opens (or prepares to create) the cache at `path`, loading every
    /// parseable record.
    pub fn open(path: impl AsRef<Path>) -> Self {
        let path = path.as_ref().to_path_buf();
        let mut entries = HashMap::new();
        if let Ok(file) = File::open(&path) {
            for line in BufReader::new(file).lines().map_while(Result::ok) {
                if let Ok(record) = serde_json::from_str::<CacheRecord>(&line) {
                    entries.insert(record.key_hash, record.raw_text);
                }
            }
        }
        Self { path, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, key_hash: &str) -> Option<&str> {
        self.entries.get(key_hash).map(String::as_str)
    }

    /// Appends a record to disk and indexes it.
    pub fn store(
        &mut self,
        key_hash: &str,
        prompt_sha: &str,
        sample_index: usize,
        raw_text: &str,
    ) -> std::io::Result<()> {
        let record = CacheRecord {
            key_hash: key_hash.to_string(),
            prompt_sha: prompt_sha.to_string(),
            sample_index,
            raw_text: raw_text.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        if let Some(parent) = self.path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(file, "{line}")?;
        self.entries.insert(record.key_hash, record.raw_text);
        Ok(())
    }
}
