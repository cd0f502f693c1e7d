//! Persistent, versioned catalog. Reads go to an in-memory [`Catalog`];
//! writes go to the [`Store`] first and are then published in memory, after
//! which the generation counter is bumped.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use osc_core::canonical::{self, Json};
use osc_core::sdl::{self, ParseError, ServiceDescription, Vocabulary};
use thiserror::Error;

use crate::catalog::{diagnostic_json, Catalog, QueryError, ServiceEntry};
use crate::evaluator;
use crate::fetch::Fetched;
use crate::store::{Store, StoreError, VersionMeta};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Result of committing an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Committed {
    pub version: u64,
    /// False when the content hash equalled the latest version's.
    pub changed: bool,
}

pub struct Repository {
    store: Store,
    catalog: RwLock<Catalog>,
    generation: AtomicU64,
    writes: Mutex<()>,
}

pub fn check_id(id: &str) -> Result<(), QueryError> {
    if sdl::is_ident(id) {
        Ok(())
    } else {
        Err(QueryError::invalid(
            format!("`{id}` is not a valid identifier (lowercase letters, digits and `_`)"),
            Vec::new(),
        ))
    }
}

impl Repository {
    /// Loads vocabularies and the latest version of every service. Services
    /// that no longer resolve are skipped with a warning; their files stay.
    pub fn open(store: Store) -> Result<Repository, StoreError> {
        let mut catalog = Catalog::default();
        for (id, source) in store.vocabularies()? {
            match sdl::parse_vocabulary(&source) {
                Ok(v) if v.id == id => {
                    catalog.vocabularies.insert(id, Arc::new(v));
                }
                Ok(v) => {
                    tracing::warn!(file = %id, found = %v.id, "vocabulary id does not match its file name")
                }
                Err(errors) => {
                    tracing::warn!(vocabulary = %id, errors = errors.len(), "stored vocabulary does not parse")
                }
            }
        }
        for id in store.service_ids()? {
            let Some(n) = store.latest_version(&id)? else {
                continue;
            };
            let meta = store.read_meta(&id, n)?;
            let source = store.read_version_source(&id, n)?;
            let vocab_of = |v: &str| catalog.vocabularies.get(v).cloned();
            let resolved = match evaluator::prepare(&id, &source, &vocab_of) {
                Ok((desc, vocab)) => {
                    evaluator::apply_snapshot(&desc, &vocab, &meta.fetch_snapshot).0
                }
                Err(errors) => {
                    tracing::warn!(service = %id, version = n, errors = errors.len(), "stored source no longer checks; service not loaded");
                    continue;
                }
            };
            let mut entry = match ServiceEntry::new(resolved, n) {
                Ok(e) => e,
                Err(e) => {
                    tracing::warn!(service = %id, "{e}");
                    continue;
                }
            };
            if entry.content_hash != meta.content_hash {
                tracing::warn!(service = %id, version = n, "reloaded content differs from stored version");
            }
            entry.deleted = store.is_deleted(&id);
            catalog.services.insert(id, Arc::new(entry));
        }
        Ok(Repository {
            store,
            catalog: RwLock::new(catalog),
            generation: AtomicU64::new(0),
            writes: Mutex::new(()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Bumped after every visible write.
    pub fn generation(&self) -> u64 {
        self.generation.load(Ordering::SeqCst)
    }

    fn bump(&self) {
        self.generation.fetch_add(1, Ordering::SeqCst);
    }

    pub fn catalog(&self) -> RwLockReadGuard<'_, Catalog> {
        self.catalog.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn vocabulary(&self, id: &str) -> Option<Arc<Vocabulary>> {
        self.catalog().vocabularies.get(id).cloned()
    }

    /// Services with fetch rules and their refresh interval in seconds.
    pub fn scheduled(&self) -> BTreeMap<String, u64> {
        self.catalog()
            .services
            .values()
            .filter(|e| !e.deleted)
            .filter_map(|e| Some((e.id().to_string(), e.description.refresh_interval_secs()?)))
            .collect()
    }

    pub fn latest_source(&self, id: &str) -> Result<String, StoreError> {
        self.store.read_source(id)
    }

    pub fn get_vocabulary(&self, id: &str) -> Result<Json, RepoError> {
        let vocab = self
            .vocabulary(id)
            .ok_or_else(|| QueryError::NotFound(format!("unknown vocabulary `{id}`")))?;
        let source = self.store.vocabularies()?.remove(id).unwrap_or_default();
        Ok(Json::object([
            ("id", Json::str(id)),
            ("source", Json::str(source)),
            ("vocabulary", canonical::vocabulary_json(&vocab)),
        ]))
    }

    /// Stores a vocabulary. A change that would invalidate a stored service
    /// is refused, so every service keeps resolving against its vocabulary.
    pub fn put_vocabulary(&self, id: &str, source: &str) -> Result<Json, RepoError> {
        check_id(id)?;
        let vocab = sdl::parse_vocabulary(source).map_err(|errors| {
            QueryError::invalid(
                "vocabulary does not parse",
                errors.iter().map(diagnostic_json).collect(),
            )
        })?;
        if vocab.id != id {
            return Err(QueryError::invalid(
                format!("source defines vocabulary `{}`, not `{id}`", vocab.id),
                Vec::new(),
            )
            .into());
        }
        let _w = self.writes.lock().unwrap_or_else(|e| e.into_inner());
        let broken: Vec<Json> = {
            let catalog = self.catalog();
            catalog
                .services
                .values()
                .filter(|e| e.description.vocabulary_id == id)
                .filter_map(|e| {
                    let source = self.store.read_source(e.id()).ok()?;
                    let candidate = Arc::new(vocab.clone());
                    let errors =
                        evaluator::prepare(e.id(), &source, &|_| Some(candidate.clone())).err()?;
                    Some(Json::object([
                        ("service", Json::str(e.id())),
                        ("errors", Json::array(errors.iter().map(diagnostic_json))),
                    ]))
                })
                .collect()
        };
        if !broken.is_empty() {
            return Err(QueryError::Conflict {
                message: "vocabulary change would invalidate stored services".into(),
                details: broken,
            }
            .into());
        }
        self.store.write_vocabulary(id, source)?;
        let json = canonical::vocabulary_json(&vocab);
        self.catalog
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .vocabularies
            .insert(id.to_string(), Arc::new(vocab));
        self.bump();
        Ok(json)
    }

    /// Persists `resolved` as a new version unless its content hash equals
    /// the latest one. Resubmitting a deleted service restores it.
    pub fn commit(
        &self,
        id: &str,
        source: &str,
        resolved: ServiceDescription,
        snapshot: BTreeMap<String, Fetched>,
        warnings: Vec<String>,
    ) -> Result<Committed, RepoError> {
        let mut entry =
            ServiceEntry::new(resolved, 0).map_err(|e| QueryError::Unprocessable(e.to_string()))?;
        let _w = self.writes.lock().unwrap_or_else(|e| e.into_inner());
        let latest = self.store.latest_version(id)?;
        let was_deleted = self.store.is_deleted(id);
        let unchanged = match latest {
            Some(n) => self.store.read_meta(id, n)?.content_hash == entry.content_hash,
            None => false,
        };
        let committed = if unchanged {
            self.store.write_source(id, source)?;
            Committed {
                version: latest.unwrap_or(0),
                changed: false,
            }
        } else {
            let version = latest.unwrap_or(0) + 1;
            let meta = VersionMeta {
                version,
                content_hash: entry.content_hash.clone(),
                created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                fetch_snapshot: snapshot,
                warnings,
            };
            self.store
                .append_version(id, &entry.canonical, source, &meta)?;
            Committed {
                version,
                changed: true,
            }
        };
        if was_deleted {
            self.store.set_deleted(id, false)?;
        } else if committed.changed {
            self.store.write_index()?;
        }
        if committed.changed || was_deleted || !self.catalog().services.contains_key(id) {
            entry.version = committed.version;
            self.catalog
                .write()
                .unwrap_or_else(|e| e.into_inner())
                .services
                .insert(id.to_string(), Arc::new(entry));
            self.bump();
        }
        Ok(committed)
    }

    fn record_json(&self, id: &str, n: u64) -> Result<Json, RepoError> {
        let meta = self.store.read_meta(id, n)?;
        let resolved = self.store.read_resolved(id, n)?;
        let source = self.store.read_version_source(id, n)?;
        let mut fields = match meta.to_json() {
            Json::Object(f) => f,
            _ => BTreeMap::new(),
        };
        fields.insert("id".into(), Json::str(id));
        fields.insert("source".into(), Json::str(source));
        fields.insert(
            "resolved".into(),
            Json::Raw(String::from_utf8_lossy(&resolved).into_owned()),
        );
        Ok(Json::Object(fields))
    }

    fn live_versions(&self, id: &str) -> Result<Vec<u64>, RepoError> {
        let not_found = || QueryError::NotFound(format!("unknown service `{id}`"));
        check_id(id).map_err(|_| not_found())?;
        if self.store.is_deleted(id) {
            return Err(not_found().into());
        }
        let versions = self.store.version_numbers(id)?;
        if versions.is_empty() {
            return Err(not_found().into());
        }
        Ok(versions)
    }

    /// Latest version, or version `n`, with source and metadata.
    pub fn get_service(&self, id: &str, version: Option<u64>) -> Result<Json, RepoError> {
        let versions = self.live_versions(id)?;
        let n = match version {
            None => *versions.last().unwrap_or(&0),
            Some(n) if versions.contains(&n) => n,
            Some(n) => {
                return Err(
                    QueryError::NotFound(format!("service `{id}` has no version {n}")).into(),
                )
            }
        };
        self.record_json(id, n)
    }

    pub fn history(&self, id: &str) -> Result<Json, RepoError> {
        let versions = self.live_versions(id)?;
        let mut items = Vec::with_capacity(versions.len());
        for n in versions {
            let meta = self.store.read_meta(id, n)?;
            items.push(Json::object([
                ("version", Json::int(meta.version)),
                ("content_hash", Json::str(meta.content_hash)),
                ("created_at", Json::str(meta.created_at)),
            ]));
        }
        Ok(Json::Array(items))
    }

    /// Soft delete: the history stays on disk behind a tombstone.
    pub fn delete(&self, id: &str) -> Result<(), RepoError> {
        self.live_versions(id)?;
        let _w = self.writes.lock().unwrap_or_else(|e| e.into_inner());
        self.store.set_deleted(id, true)?;
        let mut catalog = self.catalog.write().unwrap_or_else(|e| e.into_inner());
        if let Some(e) = catalog.services.get_mut(id) {
            Arc::make_mut(e).deleted = true;
        }
        drop(catalog);
        self.bump();
        Ok(())
    }

    /// Undoes a soft delete.
    pub fn restore(&self, id: &str) -> Result<(), RepoError> {
        if !self.store.is_deleted(id) {
            return Err(QueryError::NotFound(format!("service `{id}` is not deleted")).into());
        }
        let _w = self.writes.lock().unwrap_or_else(|e| e.into_inner());
        self.store.set_deleted(id, false)?;
        let mut catalog = self.catalog.write().unwrap_or_else(|e| e.into_inner());
        if let Some(e) = catalog.services.get_mut(id) {
            Arc::make_mut(e).deleted = false;
        }
        drop(catalog);
        self.bump();
        Ok(())
    }
}

/// Positioned errors of a failed evaluation, as carried by jobs.
pub fn diagnostics_json(errors: &[ParseError]) -> Json {
    Json::array(errors.iter().map(diagnostic_json))
}
