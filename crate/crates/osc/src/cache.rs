//! Response cache for read endpoints. Every entry is tagged with the
//! repository generation it was computed at and is served only while that
//! generation is current, so a write makes all older entries invisible.

use std::collections::HashMap;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedResponse {
    pub content_type: &'static str,
    pub body: String,
}

struct Entry {
    generation: u64,
    response: CachedResponse,
}

pub struct ResponseCache {
    enabled: bool,
    capacity: usize,
    entries: Mutex<HashMap<String, Entry>>,
}

pub const DEFAULT_CAPACITY: usize = 4096;

/// Key for a request: method, path, raw query and a digest of the body.
pub fn cache_key(method: &str, path: &str, query: &str, body: &[u8]) -> String {
    format!(
        "{method} {path}?{query} {}",
        hex::encode(Sha256::digest(body))
    )
}

impl ResponseCache {
    pub fn new(enabled: bool, capacity: usize) -> Self {
        ResponseCache {
            enabled,
            capacity: capacity.max(1),
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn get(&self, key: &str, generation: u64) -> Option<CachedResponse> {
        if !self.enabled {
            return None;
        }
        let entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        entries
            .get(key)
            .filter(|e| e.generation == generation)
            .map(|e| e.response.clone())
    }

    /// Stores a response computed at `generation`, the value read before
    /// computing it. A write racing with the computation bumps the
    /// generation, so the stored entry is never served.
    pub fn put(&self, key: String, generation: u64, response: CachedResponse) {
        if !self.enabled {
            return;
        }
        let mut entries = self.entries.lock().unwrap_or_else(|e| e.into_inner());
        if entries.len() >= self.capacity && !entries.contains_key(&key) {
            entries.retain(|_, e| e.generation == generation);
            if entries.len() >= self.capacity {
                entries.clear();
            }
        }
        entries.insert(
            key,
            Entry {
                generation,
                response,
            },
        );
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
