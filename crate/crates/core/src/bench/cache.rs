//! Content-addressed trace cache: `<dir>/<key>.trace.jsonl`.

use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dsl::{canonicalize, Limits};
use crate::simenv::{EnvConfig, StateSnapshot};
use crate::trace::ExecutionTrace;

#[derive(Debug, Clone)]
pub struct TraceCache {
    dir: PathBuf,
}

impl TraceCache {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 over everything that determines a run's trace.
    pub fn key(
        source: &str,
        env: &EnvConfig,
        snapshot: Option<&StateSnapshot>,
        limits: &Limits,
        seed: u64,
    ) -> String {
        let mut h = Sha256::new();
        h.update(b"envtrace-cache-v1\0");
        h.update(canonicalize(source).as_bytes());
        h.update(b"\0");
        h.update(env.clone().with_seed(seed).digest().as_bytes());
        h.update(b"\0");
        h.update(serde_json::to_vec(&snapshot).expect("snapshot serializes"));
        h.update(b"\0");
        h.update(serde_json::to_vec(limits).expect("limits serialize"));
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.trace.jsonl"))
    }

    /// Stored trace for `key`. Unreadable or corrupt entries are removed and
    /// reported as a miss.
    pub fn get(&self, key: &str) -> Option<ExecutionTrace> {
        let path = self.path(key);
        let bytes = std::fs::read(&path).ok()?;
        match ExecutionTrace::deserialize(&bytes) {
            Ok(t) => Some(t),
            Err(_) => {
                let _ = std::fs::remove_file(&path);
                None
            }
        }
    }

    /// Write through a temporary file in the same directory, then rename, so
    /// concurrent readers never see a partial entry.
    pub fn put(&self, key: &str, trace: &ExecutionTrace) -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&trace.serialize())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
