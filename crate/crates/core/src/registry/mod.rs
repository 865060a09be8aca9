//! Registry access: class-name search plus pom, sources and binary retrieval.
//!
//! A [`Registry`] wraps one [`Backend`] (live HTTP or a local fixture tree)
//! with an optional persistent [`Cache`] and a retry policy. Every fetch goes
//! through the cache first, so a re-run over the same candidates issues no
//! backend reads at all.

mod cache;
mod fixture;
mod gav;
mod live;

use std::collections::HashSet;
use std::fmt;
use std::io::Cursor;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cache::{Cache, CacheStats, CachedBlob};
pub use fixture::{zip_entries, FixtureBackend, FixtureWriter, SEARCH_INDEX_FILE};
pub use gav::{CoordinateError, Ga, Gav};
pub use live::{LiveBackend, LiveConfig};

pub const DEFAULT_PAGE_SIZE: usize = 200;
pub const DEFAULT_MAX_PAGES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlobKind {
    Pom,
    SourcesArchive,
    BinaryArchive,
}

impl BlobKind {
    /// File name of this kind of blob in the repository layout.
    pub fn file_name(self, gav: &Gav) -> String {
        let stem = format!("{}-{}", gav.artifact(), gav.version());
        match self {
            BlobKind::Pom => format!("{stem}.pom"),
            BlobKind::SourcesArchive => format!("{stem}-sources.jar"),
            BlobKind::BinaryArchive => format!("{stem}.jar"),
        }
    }

    /// Path relative to the repository root.
    pub fn repository_path(self, gav: &Gav) -> String {
        format!("{}/{}", gav.repository_dir(), self.file_name(gav))
    }

    pub fn is_archive(self) -> bool {
        !matches!(self, BlobKind::Pom)
    }
}

impl fmt::Display for BlobKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlobKind::Pom => "pom",
            BlobKind::SourcesArchive => "sources-archive",
            BlobKind::BinaryArchive => "binary-archive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Network,
    Cache,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryBlob {
    pub gav: Gav,
    pub kind: BlobKind,
    pub bytes: Vec<u8>,
    pub origin: Origin,
}

/// One page of class-name search results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPage {
    pub class_name: String,
    pub page_index: usize,
    pub page_size: usize,
    pub results: Vec<Gav>,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry unreachable while {context}: {message}")]
    Unreachable { context: String, message: String },
    #[error("malformed registry response while {context}: {message}")]
    Malformed { context: String, message: String },
    #[error("{kind} of {gav} not found")]
    NotFound { gav: Gav, kind: BlobKind },
    #[error("corrupt {kind} of {gav}: {message}")]
    CorruptArchive {
        gav: Gav,
        kind: BlobKind,
        message: String,
    },
    #[error("invalid class name `{0}`: expected a non-empty unqualified name")]
    InvalidClassName(String),
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RegistryError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, RegistryError::Unreachable { .. })
    }
}

/// The raw data source behind a [`Registry`].
pub trait Backend: Send + Sync {
    /// Returns at most `rows` matches for `class_name`, starting at offset `start`.
    fn search(&self, class_name: &str, start: usize, rows: usize) -> Result<Vec<Gav>, RegistryError>;

    fn fetch(&self, gav: &Gav, kind: BlobKind) -> Result<Vec<u8>, RegistryError>;

    /// Origin tag attached to blobs served by this backend.
    fn origin(&self) -> Origin;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            attempts: 1,
            base_delay: Duration::ZERO,
        }
    }

    fn run<T>(&self, mut op: impl FnMut() -> Result<T, RegistryError>) -> Result<T, RegistryError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match op() {
                Err(err) if err.is_retryable() && attempt < self.attempts.max(1) => {
                    let delay = self.base_delay * 2u32.saturating_pow(attempt - 1);
                    log::warn!("{err}; retrying in {delay:?} (attempt {attempt})");
                    thread::sleep(delay);
                }
                other => return other,
            }
        }
    }
}

/// Counters for registry traffic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryStats {
    pub backend_reads: usize,
    pub cache_hits: usize,
}

pub struct Registry {
    backend: Box<dyn Backend>,
    cache: Option<Cache>,
    retry: RetryPolicy,
    backend_reads: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl Registry {
    pub fn new(backend: impl Backend + 'static) -> Self {
        Self {
            backend: Box::new(backend),
            cache: None,
            retry: RetryPolicy::default(),
            backend_reads: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        }
    }

    pub fn with_cache(mut self, cache: Cache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn cache(&self) -> Option<&Cache> {
        self.cache.as_ref()
    }

    pub fn stats(&self) -> RegistryStats {
        RegistryStats {
            backend_reads: self.backend_reads.load(Ordering::Relaxed),
            cache_hits: self.cache_hits.load(Ordering::Relaxed),
        }
    }

    /// Fetches one page of search results, consulting the cache first.
    pub fn search_page(
        &self,
        class_name: &str,
        page_index: usize,
        page_size: usize,
    ) -> Result<QueryPage, RegistryError> {
        validate_class_name(class_name)?;
        if let Some(cache) = &self.cache {
            if let Some(results) = cache.get_page(class_name, page_index, page_size)? {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(QueryPage {
                    class_name: class_name.to_string(),
                    page_index,
                    page_size,
                    results,
                });
            }
        }
        let mut results = self.retry.run(|| {
            self.backend_reads.fetch_add(1, Ordering::Relaxed);
            self.backend.search(class_name, page_index * page_size, page_size)
        })?;
        results.truncate(page_size);
        if let Some(cache) = &self.cache {
            cache.put_page(class_name, page_index, page_size, &results)?;
        }
        Ok(QueryPage {
            class_name: class_name.to_string(),
            page_index,
            page_size,
            results,
        })
    }

    /// Artifacts containing a class with the given unqualified name.
    ///
    /// Concatenates up to `max_pages` pages, dropping duplicates (first
    /// occurrence wins) and stopping at the first short page. Malformed pages
    /// are logged and skipped.
    pub fn search_by_class(
        &self,
        class_name: &str,
        max_pages: usize,
        page_size: usize,
    ) -> Result<Vec<Gav>, RegistryError> {
        validate_class_name(class_name)?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for page_index in 0..max_pages {
            let page = match self.search_page(class_name, page_index, page_size) {
                Ok(page) => page,
                Err(err @ RegistryError::Malformed { .. }) => {
                    log::warn!("skipping page {page_index} for {class_name}: {err}");
                    continue;
                }
                Err(RegistryError::Unreachable { message, .. }) => {
                    return Err(RegistryError::Unreachable {
                        context: format!("searching for class {class_name} (page {page_index})"),
                        message,
                    })
                }
                Err(err) => return Err(err),
            };
            let short = page.results.len() < page_size;
            for gav in page.results {
                if seen.insert(gav.clone()) {
                    out.push(gav);
                }
            }
            if short {
                break;
            }
        }
        Ok(out)
    }

    pub fn fetch_pom(&self, gav: &Gav) -> Result<RegistryBlob, RegistryError> {
        self.fetch(gav, BlobKind::Pom)
    }

    pub fn fetch_sources(&self, gav: &Gav) -> Result<RegistryBlob, RegistryError> {
        self.fetch(gav, BlobKind::SourcesArchive)
    }

    pub fn fetch_binary(&self, gav: &Gav) -> Result<RegistryBlob, RegistryError> {
        self.fetch(gav, BlobKind::BinaryArchive)
    }

    pub fn fetch(&self, gav: &Gav, kind: BlobKind) -> Result<RegistryBlob, RegistryError> {
        let blob = self.fetch_unchecked(gav, kind)?;
        validate_payload(&blob)?;
        Ok(blob)
    }

    fn fetch_unchecked(&self, gav: &Gav, kind: BlobKind) -> Result<RegistryBlob, RegistryError> {
        if let Some(cache) = &self.cache {
            match cache.get_blob(gav, kind)? {
                Some(CachedBlob::Present(bytes)) => {
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    return Ok(RegistryBlob {
                        gav: gav.clone(),
                        kind,
                        bytes,
                        origin: Origin::Cache,
                    });
                }
                Some(CachedBlob::Missing) => {
                    self.cache_hits.fetch_add(1, Ordering::Relaxed);
                    return Err(RegistryError::NotFound {
                        gav: gav.clone(),
                        kind,
                    });
                }
                None => {}
            }
        }
        let fetched = self.retry.run(|| {
            self.backend_reads.fetch_add(1, Ordering::Relaxed);
            self.backend.fetch(gav, kind)
        });
        match fetched {
            Ok(bytes) => {
                if let Some(cache) = &self.cache {
                    cache.put_blob(gav, kind, &bytes)?;
                }
                Ok(RegistryBlob {
                    gav: gav.clone(),
                    kind,
                    bytes,
                    origin: self.backend.origin(),
                })
            }
            Err(err @ RegistryError::NotFound { .. }) => {
                if let Some(cache) = &self.cache {
                    cache.put_missing(gav, kind)?;
                }
                Err(err)
            }
            Err(err) => Err(err),
        }
    }
}

fn validate_class_name(class_name: &str) -> Result<(), RegistryError> {
    if class_name.is_empty() || class_name.contains(['.', '/']) || class_name.chars().any(char::is_whitespace) {
        return Err(RegistryError::InvalidClassName(class_name.to_string()));
    }
    Ok(())
}

fn validate_payload(blob: &RegistryBlob) -> Result<(), RegistryError> {
    let corrupt = |message: String| RegistryError::CorruptArchive {
        gav: blob.gav.clone(),
        kind: blob.kind,
        message,
    };
    if blob.bytes.is_empty() {
        return Err(match blob.kind {
            BlobKind::Pom => RegistryError::Malformed {
                context: format!("fetching pom of {}", blob.gav),
                message: "empty payload".into(),
            },
            _ => corrupt("empty payload".into()),
        });
    }
    if blob.kind.is_archive() {
        zip::ZipArchive::new(Cursor::new(&blob.bytes)).map_err(|e| corrupt(e.to_string()))?;
    }
    Ok(())
}
