//! Content-addressed stage cache under `<out>/cache`. Entries are written to a
//! temporary name and renamed into place, so concurrent runs never observe a
//! partial file. Deleting the directory only costs recomputation.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Hash of an ordered list of key parts.
pub fn key(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

#[derive(Debug, Clone)]
pub struct StageCache {
    dir: PathBuf,
}

impl StageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        StageCache { dir: dir.into() }
    }

    pub fn path(&self, stage: &str, key: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{}.{ext}", &key[..16.min(key.len())]))
    }

    pub fn load(&self, stage: &str, key: &str, ext: &str) -> Option<Vec<u8>> {
        let path = self.path(stage, key, ext);
        let bytes = fs::read(&path).ok()?;
        log::debug!("cache hit {}", path.display());
        Some(bytes)
    }

    pub fn store(&self, stage: &str, key: &str, ext: &str, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.path(stage, key, ext), bytes)
    }
}
