//! Content-addressed response cache.
//!
//! Entries live at `<dir>/<first two hex digits>/<sha256>.json` and hold
//! `{request_hash, model, created_at, response}`. Writes go through a temp
//! file in the same directory and a rename, so readers never see a partial
//! entry. Concurrent misses on one key within a process compute once.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::transport::{ChatRequest, ChatTransport, ClassifierTransport, ClassifyRequest, TransportError, TransportResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_hash: String,
    pub model: String,
    pub created_at: String,
    pub response: Value,
}

pub struct ResponseCache {
    dir: PathBuf,
    inflight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

/// SHA-256 over the model name and each part, every field length-prefixed
/// so that field boundaries cannot be forged by concatenation.
pub fn request_hash(model: &str, parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for field in std::iter::once(model.as_bytes()).chain(parts.iter().copied()) {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field);
    }
    format!("{:x}", h.finalize())
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            inflight: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// A valid stored response, or `None` for a miss or an unreadable entry.
    pub fn get(&self, key: &str) -> Option<Value> {
        let path = self.path(key);
        let text = fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(entry) if entry.request_hash == key => Some(entry.response),
            _ => {
                log::warn!("ignoring corrupt cache entry {}", path.display());
                None
            }
        }
    }

    fn put(&self, key: &str, model: &str, response: &Value) -> std::io::Result<()> {
        let path = self.path(key);
        let parent = path.parent().unwrap_or(&self.dir);
        fs::create_dir_all(parent)?;
        let entry = CacheEntry {
            request_hash: key.to_string(),
            model: model.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
            response: response.clone(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        serde_json::to_writer_pretty(&mut tmp, &entry)?;
        tmp.write_all(b"\n")?;
        tmp.flush()?;
        if path.exists() {
            // Only reached when the existing entry failed validation.
            tmp.persist(&path).map_err(|e| e.error)?;
        } else if let Err(e) = tmp.persist_noclobber(&path) {
            if e.error.kind() != std::io::ErrorKind::AlreadyExists {
                return Err(e.error);
            }
        }
        Ok(())
    }

    /// Returns the cached response for `key`, computing and storing it on a
    /// miss. Failed computations are not cached.
    pub fn get_or_compute<E>(
        &self,
        key: &str,
        model: &str,
        compute: impl FnOnce() -> std::result::Result<Value, E>,
    ) -> std::result::Result<Value, E> {
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        let slot = {
            let mut map = self.inflight.lock().unwrap_or_else(|e| e.into_inner());
            map.entry(key.to_string()).or_default().clone()
        };
        let _guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(hit) = self.get(key) {
            return Ok(hit);
        }
        let value = compute()?;
        if let Err(e) = self.put(key, model, &value) {
            log::warn!("could not write cache entry {}: {e}", self.path(key).display());
        }
        Ok(value)
    }
}

fn chat_key(r: &ChatRequest) -> String {
    let (mime, bytes) = r.image.as_ref().map_or((&[][..], &[][..]), |i| (i.mime.as_bytes(), &i.bytes[..]));
    request_hash(
        &r.model,
        &[
            r.system.as_deref().unwrap_or("").as_bytes(),
            r.prompt.as_bytes(),
            mime,
            bytes,
        ],
    )
}

fn classify_key(r: &ClassifyRequest) -> String {
    let mut parts: Vec<&[u8]> = vec![r.image.mime.as_bytes(), &r.image.bytes];
    parts.extend(r.texts.iter().map(|t| t.as_bytes()));
    request_hash(&r.model, &parts)
}

/// Any transport with a response cache in front of it.
pub struct Cached<T> {
    inner: T,
    cache: Arc<ResponseCache>,
}

impl<T> Cached<T> {
    pub fn new(inner: T, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }
}

impl<T: ChatTransport> ChatTransport for Cached<T> {
    fn complete(&self, request: &ChatRequest) -> TransportResult<String> {
        let value = self
            .cache
            .get_or_compute(&chat_key(request), &request.model, || self.inner.complete(request).map(Value::String))?;
        match value {
            Value::String(s) => Ok(s),
            other => Err(TransportError::Fatal(format!("cached chat response is not a string: {other}"))),
        }
    }
}

impl<T: ClassifierTransport> ClassifierTransport for Cached<T> {
    fn scores(&self, request: &ClassifyRequest) -> TransportResult<Vec<f64>> {
        let value = self.cache.get_or_compute(&classify_key(request), &request.model, || {
            self.inner.scores(request).map(Value::from)
        })?;
        serde_json::from_value(value).map_err(|e| TransportError::Fatal(format!("cached scores unreadable: {e}")))
    }
}
