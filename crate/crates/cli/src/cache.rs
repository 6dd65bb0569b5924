//! Content-addressed results cache.
//!
//! Entries live in `<dir>/<key>.json`, where the key hashes the canonical
//! inputs, the command and the parameters. Writes go to a temporary file
//! that is renamed into place, so readers never observe a partial entry.
//! An entry whose stored key or checksum disagrees with its contents is
//! treated as corrupted and recomputed.

use crate::error::{CliError, Result};
use crate::report::Report;
use crate::specfile::sha256_hex;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable naming the default cache directory.
pub const CACHE_ENV: &str = "NCLAB_CACHE";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    key: String,
    checksum: String,
    report: Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheStatus {
    Disabled,
    Miss,
    Hit,
    /// A corrupted entry was found, discarded and recomputed.
    Recovered,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

pub enum Lookup {
    Hit(Report),
    Miss,
    Corrupted,
}

fn checksum(report: &Report) -> String {
    sha256_hex(serde_json::to_string(&report.stable_view()).expect("report serializes").as_bytes())
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn lookup(&self, key: &str) -> Lookup {
        let path = self.path(key);
        let Ok(bytes) = std::fs::read(&path) else {
            return Lookup::Miss;
        };
        match serde_json::from_slice::<Entry>(&bytes) {
            Ok(e) if e.key == key && e.checksum == checksum(&e.report) => Lookup::Hit(e.report),
            _ => Lookup::Corrupted,
        }
    }

    pub fn store(&self, key: &str, report: &Report) -> Result<()> {
        let entry = Entry { key: key.to_string(), checksum: checksum(report), report: report.clone() };
        let bytes = serde_json::to_vec_pretty(&entry)?;
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
        let dest = self.path(key);
        std::fs::rename(&tmp, &dest).map_err(|e| CliError::io(&dest, e))
    }
}

/// Cache key of a run.
pub fn cache_key(spec_hash: &str, command: &str, parameters: &serde_json::Value) -> String {
    let params = serde_json::to_string(parameters).expect("parameters serialize");
    sha256_hex(format!("{spec_hash}\n{command}\n{params}").as_bytes())
}
