//! Persistent response cache.
//!
//! Layout under the cache root:
//!
//! ```text
//! blobs/<group-as-path>/<artifact>/<version>/<file>          fetched payload
//! blobs/<group-as-path>/<artifact>/<version>/<file>.missing  negative entry
//! search/<class-name>/<page-size>-<page-index>.json          one result page
//! records/<namespace>/<key>.json                             other results
//! ```
//!
//! All writes go to a temporary file in the target directory and are renamed
//! into place, so concurrent readers never observe a partial entry.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::{BlobKind, Gav};

const MISSING_SUFFIX: &str = ".missing";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CachedBlob {
    Present(Vec<u8>),
    /// The backend reported the blob as absent.
    Missing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub blobs: usize,
    pub missing: usize,
    pub search_pages: usize,
    pub records: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn blob_path(&self, gav: &Gav, kind: BlobKind) -> PathBuf {
        self.root.join("blobs").join(kind.repository_path(gav))
    }

    fn missing_path(&self, gav: &Gav, kind: BlobKind) -> PathBuf {
        let mut path = self.blob_path(gav, kind).into_os_string();
        path.push(MISSING_SUFFIX);
        path.into()
    }

    fn page_path(&self, class_name: &str, page_index: usize, page_size: usize) -> PathBuf {
        self.root
            .join("search")
            .join(path_safe(class_name))
            .join(format!("{page_size}-{page_index}.json"))
    }

    fn record_path(&self, namespace: &str, key: &str) -> PathBuf {
        self.root
            .join("records")
            .join(path_safe(namespace))
            .join(format!("{}.json", path_safe(key)))
    }

    pub fn get_blob(&self, gav: &Gav, kind: BlobKind) -> io::Result<Option<CachedBlob>> {
        match fs::read(self.blob_path(gav, kind)) {
            Ok(bytes) => return Ok(Some(CachedBlob::Present(bytes))),
            Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
            Err(_) => {}
        }
        if self.missing_path(gav, kind).exists() {
            return Ok(Some(CachedBlob::Missing));
        }
        Ok(None)
    }

    pub fn put_blob(&self, gav: &Gav, kind: BlobKind, bytes: &[u8]) -> io::Result<()> {
        write_atomic(&self.blob_path(gav, kind), bytes)
    }

    pub fn put_missing(&self, gav: &Gav, kind: BlobKind) -> io::Result<()> {
        write_atomic(&self.missing_path(gav, kind), b"")
    }

    pub fn get_page(&self, class_name: &str, page_index: usize, page_size: usize) -> io::Result<Option<Vec<Gav>>> {
        self.read_json(&self.page_path(class_name, page_index, page_size))
    }

    pub fn put_page(&self, class_name: &str, page_index: usize, page_size: usize, results: &[Gav]) -> io::Result<()> {
        self.write_json(&self.page_path(class_name, page_index, page_size), &results)
    }

    /// Reads a previously stored result record, e.g. a cached build outcome.
    pub fn get_record<T: DeserializeOwned>(&self, namespace: &str, key: &str) -> io::Result<Option<T>> {
        self.read_json(&self.record_path(namespace, key))
    }

    pub fn put_record<T: Serialize>(&self, namespace: &str, key: &str, value: &T) -> io::Result<()> {
        self.write_json(&self.record_path(namespace, key), value)
    }

    fn read_json<T: DeserializeOwned>(&self, path: &Path) -> io::Result<Option<T>> {
        match fs::read(path) {
            Ok(bytes) => match serde_json::from_slice(&bytes) {
                Ok(value) => Ok(Some(value)),
                Err(err) => {
                    log::warn!("ignoring unreadable cache entry {}: {err}", path.display());
                    Ok(None)
                }
            },
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn write_json<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> io::Result<()> {
        let bytes = serde_json::to_vec(value).map_err(io::Error::other)?;
        write_atomic(path, &bytes)
    }

    pub fn clear(&self) -> io::Result<()> {
        for sub in ["blobs", "search", "records"] {
            let dir = self.root.join(sub);
            if dir.exists() {
                fs::remove_dir_all(&dir)?;
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> io::Result<CacheStats> {
        let mut stats = CacheStats::default();
        for (sub, counter) in [("blobs", 0), ("search", 1), ("records", 2)] {
            let dir = self.root.join(sub);
            if !dir.exists() {
                continue;
            }
            for entry in WalkDir::new(&dir) {
                let entry = entry.map_err(io::Error::other)?;
                if !entry.file_type().is_file() {
                    continue;
                }
                stats.bytes += entry.metadata().map_err(io::Error::other)?.len();
                match counter {
                    0 if entry.file_name().to_string_lossy().ends_with(MISSING_SUFFIX) => stats.missing += 1,
                    0 => stats.blobs += 1,
                    1 => stats.search_pages += 1,
                    _ => stats.records += 1,
                }
            }
        }
        Ok(stats)
    }
}

/// Keeps plain identifiers readable and hashes anything else.
fn path_safe(raw: &str) -> String {
    let plain = !raw.is_empty()
        && raw.len() <= 120
        && raw
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '$'));
    if plain {
        raw.to_string()
    } else {
        format!("h-{}", hex::encode(Sha256::digest(raw.as_bytes())))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
