//! Text embedding providers.
//!
//! Two providers sit behind [`EmbeddingProvider`]:
//!
//! * [`FileProvider`] resolves texts in a JSON lookup table keyed by the hex
//!   SHA-256 of the text's UTF-8 bytes.
//! * [`HttpProvider`] POSTs `{"texts": [...]}` to an embedding service and
//!   expects `{"embeddings": [[...]], "dim": D}` back. Transient failures are
//!   retried with exponential backoff. Results are cached in memory and, when
//!   a cache directory is available, as one JSON file per text hash.
//!
//! Concurrent callers asking for the same text share a single upstream
//! request: each missing hash is guarded by its own lock while it is fetched.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Environment variable that relocates the on-disk embedding cache.
pub const CACHE_DIR_ENV: &str = "PANEVAL_CACHE_DIR";

/// Hex SHA-256 of the UTF-8 bytes of `text`.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub trait EmbeddingProvider: Send + Sync {
    /// One embedding per input text, in input order.
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vector>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    File,
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint_url: Option<String>,
    pub lookup_path: Option<PathBuf>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub expected_dim: Option<usize>,
    /// Sent as `Authorization: Bearer <token>` when set.
    pub bearer_token: Option<String>,
    /// Explicit cache location; otherwise `PANEVAL_CACHE_DIR`, then the user cache dir.
    pub cache_dir: Option<PathBuf>,
    /// Delay before the first retry; doubles on every further attempt.
    pub backoff_base: Duration,
}

impl ProviderConfig {
    pub fn http(endpoint_url: impl Into<String>) -> Self {
        ProviderConfig {
            kind: ProviderKind::Http,
            endpoint_url: Some(endpoint_url.into()),
            ..ProviderConfig::base(ProviderKind::Http)
        }
    }

    pub fn file(lookup_path: impl Into<PathBuf>) -> Self {
        ProviderConfig {
            lookup_path: Some(lookup_path.into()),
            ..ProviderConfig::base(ProviderKind::File)
        }
    }

    fn base(kind: ProviderKind) -> Self {
        ProviderConfig {
            kind,
            endpoint_url: None,
            lookup_path: None,
            timeout: Duration::from_secs(30),
            max_retries: 3,
            expected_dim: None,
            bearer_token: None,
            cache_dir: None,
            backoff_base: Duration::from_millis(250),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProviderKind::Http if self.endpoint_url.is_none() => {
                Err(Error::invalid("http provider requires an endpoint URL"))
            }
            ProviderKind::File if self.lookup_path.is_none() => {
                Err(Error::invalid("file provider requires a lookup path"))
            }
            _ if self.expected_dim == Some(0) => {
                Err(Error::invalid("expected embedding dimension must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    fn resolved_cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
            .or_else(|| dirs::cache_dir().map(|d| d.join("paneval").join("embeddings")))
    }

    /// Builds the provider described by this configuration.
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::File => Box::new(FileProvider::from_config(self)?),
            ProviderKind::Http => Box::new(HttpProvider::new(self.clone())?),
        })
    }
}

/// Embeds `texts` with a provider built from `cfg`.
pub fn embed_texts(texts: &[&str], cfg: &ProviderConfig) -> Result<Vec<Vector>> {
    cfg.build()?.embed_texts(texts)
}

fn check_texts(texts: &[&str]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::invalid("no texts to embed"));
    }
    if let Some(i) = texts.iter().position(|t| t.is_empty()) {
        return Err(Error::invalid(format!("text {i} is empty")));
    }
    Ok(())
}

fn check_dim(v: &Vector, expected: Option<usize>) -> Result<()> {
    match expected {
        Some(d) if v.dim() != d => Err(Error::Protocol(format!(
            "embedding has dim {}, expected {d}",
            v.dim()
        ))),
        _ => Ok(()),
    }
}

/// Embeddings resolved from a JSON map of text hash to vector.
#[derive(Debug, Clone)]
pub struct FileProvider {
    table: HashMap<String, Vector>,
    expected_dim: Option<usize>,
}

impl FileProvider {
    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.to_owned(),
                position: format!("line {}, column {}", e.line(), e.column()),
                message: e.to_string(),
            })?;
        let mut table = HashMap::with_capacity(raw.len());
        for (hash, values) in raw {
            let v = Vector::new(values).map_err(|e| Error::Format {
                path: path.to_owned(),
                position: format!("key {hash}"),
                message: e.to_string(),
            })?;
            table.insert(hash.to_ascii_lowercase(), v);
        }
        Ok(FileProvider {
            table,
            expected_dim,
        })
    }

    fn from_config(cfg: &ProviderConfig) -> Result<Self> {
        let path = cfg
            .lookup_path
            .as_deref()
            .ok_or_else(|| Error::invalid("file provider requires a lookup path"))?;
        FileProvider::load(path, cfg.expected_dim)
    }

    pub fn from_map(table: HashMap<String, Vector>) -> Self {
        FileProvider {
            table,
            expected_dim: None,
        }
    }
}

impl EmbeddingProvider for FileProvider {
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        check_texts(texts)?;
        texts
            .iter()
            .map(|t| {
                let hash = content_hash(t);
                let v = self
                    .table
                    .get(&hash)
                    .cloned()
                    .ok_or(Error::NotFound { hash })?;
                check_dim(&v, self.expected_dim)?;
                Ok(v)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    dim: usize,
    embedding: Vec<f64>,
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

/// Embedding service client with retries and a content-addressed cache.
pub struct HttpProvider {
    cfg: ProviderConfig,
    agent: ureq::Agent,
    cache_dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Vector>>,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl HttpProvider {
    pub fn new(cfg: ProviderConfig) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let cache_dir = cfg.resolved_cache_dir();
        Ok(HttpProvider {
            cfg,
            agent,
            cache_dir,
            memory: Mutex::new(HashMap::new()),
            in_flight: Mutex::new(HashMap::new()),
        })
    }

    pub fn cache_dir(&self) -> Option<&Path> {
        self.cache_dir.as_deref()
    }

    fn cache_path(&self, hash: &str) -> Option<PathBuf> {
        self.cache_dir.as_ref().map(|d| d.join(format!("{hash}.json")))
    }

    fn lookup_cached(&self, hash: &str) -> Option<Vector> {
        if let Some(v) = self.memory.lock().unwrap().get(hash) {
            return Some(v.clone());
        }
        let path = self.cache_path(hash)?;
        let text = std::fs::read_to_string(&path).ok()?;
        let entry: CacheEntry = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ignoring corrupt cache entry {}: {e}", path.display());
                return None;
            }
        };
        let v = Vector::new(entry.embedding).ok()?;
        if v.dim() != entry.dim || check_dim(&v, self.cfg.expected_dim).is_err() {
            return None;
        }
        self.memory
            .lock()
            .unwrap()
            .insert(hash.to_owned(), v.clone());
        Some(v)
    }

    fn store(&self, hash: &str, v: &Vector) {
        self.memory
            .lock()
            .unwrap()
            .insert(hash.to_owned(), v.clone());
        if let Some(path) = self.cache_path(hash) {
            if let Err(e) = write_cache_entry(&path, v) {
                log::warn!("failed to write cache entry {}: {e}", path.display());
            }
        }
    }

    fn lock_for(&self, hash: &str) -> Arc<Mutex<()>> {
        self.in_flight
            .lock()
            .unwrap()
            .entry(hash.to_owned())
            .or_default()
            .clone()
    }

    fn request_once(&self, texts: &[&str]) -> std::result::Result<Vec<Vector>, Attempt> {
        let url = self.cfg.endpoint_url.as_deref().unwrap_or_default();
        let mut req = self.agent.post(url);
        if let Some(token) = &self.cfg.bearer_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = match req.send_json(EmbedRequest { texts }) {
            Ok(r) => r,
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(Error::Protocol(format!(
                "service answered HTTP {status}"
            ))));
        }
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(Error::Protocol(format!("bad response body: {e}"))))?;
        self.parse_response(body, texts.len()).map_err(Attempt::Fatal)
    }

    fn parse_response(&self, body: EmbedResponse, expected: usize) -> Result<Vec<Vector>> {
        if body.embeddings.len() != expected {
            return Err(Error::Protocol(format!(
                "requested {expected} embeddings, received {}",
                body.embeddings.len()
            )));
        }
        body.embeddings
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                if values.len() != body.dim {
                    return Err(Error::Protocol(format!(
                        "embedding {i} has {} values but response declares dim {}",
                        values.len(),
                        body.dim
                    )));
                }
                let v = Vector::new(values).map_err(|e| Error::Protocol(e.to_string()))?;
                check_dim(&v, self.cfg.expected_dim)?;
                Ok(v)
            })
            .collect()
    }

    fn fetch(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        let mut delay = self.cfg.backoff_base;
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                log::debug!("embedding request failed ({last}); retry {attempt} in {delay:?}");
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match self.request_once(texts) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(Error::ProviderUnreachable(format!(
            "{} after {} attempts: {last}",
            self.cfg.endpoint_url.as_deref().unwrap_or_default(),
            self.cfg.max_retries + 1
        )))
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Vector>> {
        check_texts(texts)?;
        let hashes: Vec<String> = texts.iter().map(|t| content_hash(t)).collect();

        let mut missing: BTreeMap<&str, &str> = BTreeMap::new();
        for (hash, text) in hashes.iter().zip(texts) {
            if self.lookup_cached(hash).is_none() {
                missing.insert(hash, text);
            }
        }

        if !missing.is_empty() {
            // BTreeMap order gives every caller the same lock order.
            let locks: Vec<Arc<Mutex<()>>> = missing.keys().map(|h| self.lock_for(h)).collect();
            let _guards: Vec<_> = locks.iter().map(|l| l.lock().unwrap()).collect();
            missing.retain(|hash, _| self.lookup_cached(hash).is_none());
            if !missing.is_empty() {
                let batch: Vec<&str> = missing.values().copied().collect();
                let fetched = self.fetch(&batch)?;
                for (hash, v) in missing.keys().zip(&fetched) {
                    self.store(hash, v);
                }
            }
        }

        hashes
            .iter()
            .map(|h| {
                self.lookup_cached(h).ok_or_else(|| {
                    Error::Protocol(format!("embedding for {h} vanished from the cache"))
                })
            })
            .collect()
    }
}

fn write_cache_entry(path: &Path, v: &Vector) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let entry = CacheEntry {
        dim: v.dim(),
        embedding: v.as_slice().to_vec(),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer(&mut tmp, &entry)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
