//! Local fixture backend.
//!
//! A fixture root mirrors the repository path layout
//! (`<group-as-path>/<artifact>/<version>/<artifact>-<version>[-sources].<ext>`)
//! and carries a `search-index.json` at its top level:
//!
//! ```json
//! {
//!   "format": "shadescan-search-index",
//!   "version": 1,
//!   "classes": {
//!     "YamlConstructorFactory": ["com.acme:tool:2.0", "org.other:lib:1.1"]
//!   }
//! }
//! ```
//!
//! Class keys are unqualified class names; values are ordered `group:artifact:version`
//! strings. An entry that does not parse as coordinates makes the page containing
//! it a malformed response.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use zip::write::SimpleFileOptions;

use super::{Backend, BlobKind, Gav, Origin, RegistryError};

pub const SEARCH_INDEX_FILE: &str = "search-index.json";
const INDEX_FORMAT: &str = "shadescan-search-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Default, Serialize, Deserialize)]
struct SearchIndex {
    format: String,
    version: u32,
    classes: BTreeMap<String, Vec<String>>,
}

pub struct FixtureBackend {
    root: PathBuf,
    index: BTreeMap<String, Vec<String>>,
    latency: Duration,
    reads: AtomicUsize,
}

impl FixtureBackend {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        let index_path = root.join(SEARCH_INDEX_FILE);
        let index: SearchIndex = match fs::read(&index_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", index_path.display()))
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => SearchIndex::default(),
            Err(e) => return Err(e),
        };
        if !index.format.is_empty() && (index.format != INDEX_FORMAT || index.version != INDEX_VERSION) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported search index {} v{}", index.format, index.version),
            ));
        }
        Ok(Self {
            root,
            index: index.classes,
            latency: Duration::ZERO,
            reads: AtomicUsize::new(0),
        })
    }

    /// Sleeps this long on every read, to stand in for network round trips.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Number of reads served so far.
    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    fn touch(&self) {
        self.reads.fetch_add(1, Ordering::Relaxed);
        if !self.latency.is_zero() {
            thread::sleep(self.latency);
        }
    }
}

impl Backend for FixtureBackend {
    fn search(&self, class_name: &str, start: usize, rows: usize) -> Result<Vec<Gav>, RegistryError> {
        self.touch();
        let Some(entries) = self.index.get(class_name) else {
            return Ok(Vec::new());
        };
        entries
            .iter()
            .skip(start)
            .take(rows)
            .map(|raw| {
                raw.parse().map_err(|e| RegistryError::Malformed {
                    context: format!("searching fixture index for {class_name}"),
                    message: format!("{e}"),
                })
            })
            .collect()
    }

    fn fetch(&self, gav: &Gav, kind: BlobKind) -> Result<Vec<u8>, RegistryError> {
        self.touch();
        match fs::read(self.root.join(kind.repository_path(gav))) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(RegistryError::NotFound { gav: gav.clone(), kind }),
            Err(e) => Err(RegistryError::Io(e)),
        }
    }

    fn origin(&self) -> Origin {
        Origin::Fixture
    }
}

/// Builds a zip container from `(member path, contents)` pairs.
pub fn zip_entries<P: AsRef<str>, B: AsRef<[u8]>>(entries: &[(P, B)]) -> Vec<u8> {
    let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let options = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    for (path, bytes) in entries {
        writer.start_file(path.as_ref(), options).expect("in-memory zip write");
        writer.write_all(bytes.as_ref()).expect("in-memory zip write");
    }
    writer.finish().expect("in-memory zip write").into_inner()
}

/// Authors a fixture repository on disk.
pub struct FixtureWriter {
    root: PathBuf,
    index: BTreeMap<String, Vec<String>>,
}

impl FixtureWriter {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            index: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put_raw(&mut self, gav: &Gav, kind: BlobKind, bytes: &[u8]) -> io::Result<&mut Self> {
        let path = self.root.join(kind.repository_path(gav));
        fs::create_dir_all(path.parent().expect("repository path has a parent"))?;
        fs::write(path, bytes)?;
        Ok(self)
    }

    pub fn put_pom(&mut self, gav: &Gav, xml: &str) -> io::Result<&mut Self> {
        self.put_raw(gav, BlobKind::Pom, xml.as_bytes())
    }

    /// Writes a sources archive from `(member path, java text)` pairs.
    pub fn put_sources<P: AsRef<str>, S: AsRef<str>>(&mut self, gav: &Gav, files: &[(P, S)]) -> io::Result<&mut Self> {
        let entries: Vec<(&str, &[u8])> = files
            .iter()
            .map(|(p, s)| (p.as_ref(), s.as_ref().as_bytes()))
            .collect();
        self.put_raw(gav, BlobKind::SourcesArchive, &zip_entries(&entries))
    }

    /// Writes a binary archive whose `.class` members carry placeholder bytes.
    pub fn put_binary<P: AsRef<str>>(&mut self, gav: &Gav, members: &[P]) -> io::Result<&mut Self> {
        let entries: Vec<(&str, &[u8])> = members
            .iter()
            .map(|p| (p.as_ref(), &[0xCA, 0xFE, 0xBA, 0xBE][..]))
            .collect();
        self.put_raw(gav, BlobKind::BinaryArchive, &zip_entries(&entries))
    }

    /// Appends `gav` to the search results for `class_name`.
    pub fn index(&mut self, class_name: &str, gav: &Gav) -> &mut Self {
        self.index.entry(class_name.to_string()).or_default().push(gav.to_string());
        self
    }

    /// Appends a raw (possibly malformed) entry to the search results.
    pub fn index_raw(&mut self, class_name: &str, entry: &str) -> &mut Self {
        self.index.entry(class_name.to_string()).or_default().push(entry.to_string());
        self
    }

    pub fn finish(&self) -> io::Result<PathBuf> {
        let index = SearchIndex {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            classes: self.index.clone(),
        };
        let bytes = serde_json::to_vec_pretty(&index).map_err(io::Error::other)?;
        fs::write(self.root.join(SEARCH_INDEX_FILE), bytes)?;
        Ok(self.root.clone())
    }
}
