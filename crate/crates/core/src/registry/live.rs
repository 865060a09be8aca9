//! HTTP backend for Maven Central style registries.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{Backend, BlobKind, Gav, Origin, RegistryError};

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Solr-style search endpoint.
    pub search_url: String,
    /// Root of the repository path layout.
    pub repository_url: String,
    /// Minimum delay between two requests, across all workers.
    pub min_interval: Duration,
    pub timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            search_url: "https://search.maven.org/solrsearch/select".into(),
            repository_url: "https://repo1.maven.org/maven2".into(),
            min_interval: Duration::from_millis(100),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    response: SearchBody,
}

#[derive(Deserialize)]
struct SearchBody {
    #[serde(default)]
    docs: Vec<SearchDoc>,
}

#[derive(Deserialize)]
struct SearchDoc {
    g: String,
    a: String,
    v: Option<String>,
    #[serde(rename = "latestVersion")]
    latest_version: Option<String>,
}

pub struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
    last_request: Mutex<Option<Instant>>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, RegistryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("shadescan/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| RegistryError::Unreachable {
                context: "building http client".into(),
                message: e.to_string(),
            })?;
        Ok(Self {
            config,
            client,
            last_request: Mutex::new(None),
        })
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.config.min_interval {
                thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn get(&self, url: &str, context: &str) -> Result<Option<Vec<u8>>, RegistryError> {
        self.throttle();
        log::debug!("GET {url}");
        let unreachable = |message: String| RegistryError::Unreachable {
            context: context.to_string(),
            message,
        };
        let response = self.client.get(url).send().map_err(|e| unreachable(e.to_string()))?;
        let status = response.status();
        if status == reqwest::StatusCode::NOT_FOUND {
            return Ok(None);
        }
        if status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS {
            return Err(unreachable(format!("http {status}")));
        }
        if !status.is_success() {
            return Err(RegistryError::Malformed {
                context: context.to_string(),
                message: format!("http {status}"),
            });
        }
        let bytes = response.bytes().map_err(|e| unreachable(e.to_string()))?;
        Ok(Some(bytes.to_vec()))
    }
}

pub(crate) fn search_url(base: &str, class_name: &str, start: usize, rows: usize) -> String {
    format!("{base}?q=c:{class_name}&core=gav&rows={rows}&start={start}&wt=json")
}

pub(crate) fn parse_search_response(body: &[u8], context: &str) -> Result<Vec<Gav>, RegistryError> {
    let malformed = |message: String| RegistryError::Malformed {
        context: context.to_string(),
        message,
    };
    let parsed: SearchResponse = serde_json::from_slice(body).map_err(|e| malformed(e.to_string()))?;
    parsed
        .response
        .docs
        .into_iter()
        .map(|doc| {
            let version = doc
                .v
                .or(doc.latest_version)
                .ok_or_else(|| malformed(format!("no version for {}:{}", doc.g, doc.a)))?;
            Gav::new(doc.g, doc.a, version).map_err(|e| malformed(e.to_string()))
        })
        .collect()
}

impl Backend for LiveBackend {
    fn search(&self, class_name: &str, start: usize, rows: usize) -> Result<Vec<Gav>, RegistryError> {
        let context = format!("searching for class {class_name} at offset {start}");
        let url = search_url(&self.config.search_url, class_name, start, rows);
        match self.get(&url, &context)? {
            Some(body) => parse_search_response(&body, &context),
            None => Err(RegistryError::Malformed {
                context,
                message: "search endpoint returned 404".into(),
            }),
        }
    }

    fn fetch(&self, gav: &Gav, kind: BlobKind) -> Result<Vec<u8>, RegistryError> {
        let url = format!(
            "{}/{}",
            self.config.repository_url.trim_end_matches('/'),
            kind.repository_path(gav)
        );
        self.get(&url, &format!("fetching {kind} of {gav}"))?
            .ok_or_else(|| RegistryError::NotFound { gav: gav.clone(), kind })
    }

    fn origin(&self) -> Origin {
        Origin::Network
    }
}
