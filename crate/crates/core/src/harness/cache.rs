//! Filesystem response cache keyed by canonicalized requests.
//!
//! Keys digest the endpoint kind, model name, and the request payload with
//! object keys sorted and volatile fields (request ids, timestamps)
//! stripped, so identical logical requests hit the same entry across
//! processes. Values round-trip byte-identically.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::extract::{ChatClient, ChatError, ChatRequest, ChatResponse};
use crate::simmetric::{MetricError, SimilarityMetric};

/// Keys with these names anywhere in a request payload do not participate in
/// cache identity.
const VOLATILE_KEYS: &[&str] = &["request_id", "timestamp", "nonce"];

fn strip_volatile(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !VOLATILE_KEYS.contains(&k.as_str()));
            for v in map.values_mut() {
                strip_volatile(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items.iter_mut() {
                strip_volatile(v);
            }
        }
        _ => {}
    }
}

/// Stable hex digest for a request against an endpoint kind and model.
pub fn cache_key(endpoint_kind: &str, model_name: &str, request: &serde_json::Value) -> String {
    let mut canonical = request.clone();
    strip_volatile(&mut canonical);
    // serde_json's map is ordered by key, so Value serialization is
    // canonical already.
    let body = serde_json::to_string(&canonical).expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(endpoint_kind.as_bytes());
    hasher.update([0]);
    hasher.update(model_name.as_bytes());
    hasher.update([0]);
    hasher.update(body.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    timestamp: u64,
    response: String,
}

/// One file per entry under the cache directory. Reads are lock-free; writes
/// go through a temp file and an atomic rename.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let content = std::fs::read_to_string(self.entry_path(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&content).ok()?;
        (entry.key == key).then_some(entry.response)
    }

    pub fn put(&self, key: &str, response: &str) -> std::io::Result<()> {
        let entry = CacheEntry {
            key: key.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            response: response.to_string(),
        };
        static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);
        let json = serde_json::to_string(&entry).expect("entry serializes");
        let tmp = self.dir.join(format!(
            "{key}.tmp.{}.{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, json)?;
        std::fs::rename(&tmp, self.entry_path(key))
    }
}

/// Chat client wrapper that serves repeats from the cache.
pub struct CachingChatClient {
    inner: Arc<dyn ChatClient>,
    cache: ResponseCache,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl CachingChatClient {
    pub fn new(inner: Arc<dyn ChatClient>, cache: ResponseCache) -> Self {
        CachingChatClient {
            inner,
            cache,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }
}

impl ChatClient for CachingChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let value = serde_json::to_value(request)
            .map_err(|e| ChatError::MalformedResponse(format!("unserializable request: {e}")))?;
        let key = cache_key("chat", &request.model, &value);
        if let Some(hit) = self.cache.get(&key) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return serde_json::from_str(&hit).map_err(|e| {
                ChatError::MalformedResponse(format!("corrupt cache entry {key}: {e}"))
            });
        }
        let response = self.inner.complete(request)?;
        self.misses.fetch_add(1, Ordering::SeqCst);
        let serialized = serde_json::to_string(&response)
            .map_err(|e| ChatError::MalformedResponse(format!("unserializable response: {e}")))?;
        if let Err(e) = self.cache.put(&key, &serialized) {
            log::warn!("cache write failed for {key}: {e}");
        }
        Ok(response)
    }
}

/// Metric wrapper that caches pair scores.
pub struct CachingMetric<M> {
    inner: M,
    cache: ResponseCache,
}

impl<M: SimilarityMetric> CachingMetric<M> {
    pub fn new(inner: M, cache: ResponseCache) -> Self {
        CachingMetric { inner, cache }
    }

    fn pair_key(&self, a: &str, b: &str) -> String {
        cache_key(
            "metric",
            &self.inner.name(),
            &serde_json::json!({ "a": a, "b": b }),
        )
    }
}

impl<M: SimilarityMetric> SimilarityMetric for CachingMetric<M> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn score(&self, a: &str, b: &str) -> Result<f64, MetricError> {
        let key = self.pair_key(a, b);
        if let Some(hit) = self.cache.get(&key) {
            return hit.parse::<f64>().map_err(|e| {
                MetricError::MalformedResponse(format!("corrupt cache entry {key}: {e}"))
            });
        }
        let score = self.inner.score(a, b)?;
        if let Err(e) = self
            .cache
            .put(&key, &serde_json::to_string(&score).unwrap())
        {
            log::warn!("cache write failed for {key}: {e}");
        }
        Ok(score)
    }

    fn score_batch(&self, pairs: &[(&str, &str)]) -> Vec<Result<f64, MetricError>> {
        let mut results: Vec<Option<Result<f64, MetricError>>> = Vec::with_capacity(pairs.len());
        let mut misses: Vec<usize> = Vec::new();
        for (i, (a, b)) in pairs.iter().enumerate() {
            match self.cache.get(&self.pair_key(a, b)) {
                Some(hit) => results.push(Some(hit.parse::<f64>().map_err(|e| {
                    MetricError::MalformedResponse(format!("corrupt cache entry: {e}"))
                }))),
                None => {
                    results.push(None);
                    misses.push(i);
                }
            }
        }
        if !misses.is_empty() {
            let miss_pairs: Vec<(&str, &str)> = misses.iter().map(|&i| pairs[i]).collect();
            for (&i, result) in misses.iter().zip(self.inner.score_batch(&miss_pairs)) {
                if let Ok(score) = &result {
                    let key = self.pair_key(pairs[i].0, pairs[i].1);
                    if let Err(e) = self.cache.put(&key, &serde_json::to_string(score).unwrap()) {
                        log::warn!("cache write failed for {key}: {e}");
                    }
                }
                results[i] = Some(result);
            }
        }
        results
            .into_iter()
            .map(|r| r.expect("slot filled"))
            .collect()
    }
}
