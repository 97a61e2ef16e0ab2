//! Content-addressed record/replay cache: one JSON file per request, named by
//! the request hash.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::request::{sha256_hex, CompletionRequest, CompletionResponse};
use crate::Provider;

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    request: CompletionRequest,
    response: CompletionResponse,
    response_sha256: String,
}

fn response_digest(response: &CompletionResponse) -> String {
    sha256_hex(&serde_json::to_vec(response).expect("response serializes"))
}

#[derive(Clone, Debug)]
pub struct ReplayCache {
    dir: PathBuf,
}

impl ReplayCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, request: &CompletionRequest) -> PathBuf {
        self.dir.join(format!("{}.json", request.content_hash()))
    }

    /// The stored response for `request`, if any. Entries whose key, request
    /// or response digest do not check out are reported as corrupt.
    pub fn lookup(&self, request: &CompletionRequest) -> Result<Option<CompletionResponse>, GatewayError> {
        let key = request.content_hash();
        let path = self.dir.join(format!("{key}.json"));
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::CacheIo(e.to_string())),
        };
        let corrupt = |reason: String| GatewayError::CacheCorrupt {
            path: path.clone(),
            reason,
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
        if entry.key != key || entry.request.content_hash() != key {
            return Err(corrupt("request does not match its key".into()));
        }
        if response_digest(&entry.response) != entry.response_sha256 {
            return Err(corrupt("response digest mismatch".into()));
        }
        Ok(Some(entry.response))
    }

    /// Writes the entry through a temporary file and an atomic rename, so
    /// concurrent writers of the same key never leave a torn file.
    pub fn store(&self, request: &CompletionRequest, response: &CompletionResponse) -> Result<(), GatewayError> {
        let io = |e: std::io::Error| GatewayError::CacheIo(e.to_string());
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let entry = CacheEntry {
            key: request.content_hash(),
            request: request.clone(),
            response: response.clone(),
            response_sha256: response_digest(response),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        serde_json::to_writer_pretty(&mut tmp, &entry).map_err(|e| io(e.into()))?;
        tmp.write_all(b"\n").map_err(io)?;
        tmp.persist(self.dir.join(format!("{}.json", entry.key)))
            .map_err(|e| io(e.error))?;
        Ok(())
    }
}

/// Serves from the cache when possible, otherwise calls `inner` and records
/// the response.
#[derive(Debug)]
pub struct CachedProvider<P> {
    inner: P,
    cache: ReplayCache,
    hits: AtomicUsize,
}

impl<P: Provider> CachedProvider<P> {
    pub fn new(inner: P, cache: ReplayCache) -> Self {
        Self {
            inner,
            cache,
            hits: AtomicUsize::new(0),
        }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl<P: Provider> Provider for CachedProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        if let Some(hit) = self.cache.lookup(request)? {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(hit);
        }
        let response = self.inner.complete(request)?;
        self.cache.store(request, &response)?;
        Ok(response)
    }
}

/// Serves only from the cache; a miss is an error.
#[derive(Clone, Debug)]
pub struct ReplayOnly {
    cache: ReplayCache,
}

impl ReplayOnly {
    pub fn new(cache: ReplayCache) -> Self {
        Self { cache }
    }
}

impl Provider for ReplayOnly {
    fn name(&self) -> &str {
        "replay"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        self.cache
            .lookup(request)?
            .ok_or_else(|| GatewayError::CacheMiss(request.content_hash()))
    }
}
