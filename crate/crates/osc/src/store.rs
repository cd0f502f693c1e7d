//! Append-only directory store.
//!
//! ```text
//! <data>/services/<id>/v<N>.json       canonical resolved bytes
//! <data>/services/<id>/v<N>.sdl        source evaluated for version N
//! <data>/services/<id>/v<N>.meta.json  hash, timestamps, fetch snapshot
//! <data>/services/<id>/source.sdl      latest successfully evaluated source
//! <data>/services/<id>/tombstone       present while the service is deleted
//! <data>/vocabularies/<id>.sdl
//! <data>/index.json                    rebuilt on every open
//! ```
//!
//! Every file is written to a temporary name and renamed into place. The
//! meta file of a version is written last, so a version exists exactly when
//! its meta file does; leftovers of an interrupted write are removed on open.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use osc_core::canonical::Json;
use thiserror::Error;

use crate::fetch::Fetched;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct StoreError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

pub type Result<T> = std::result::Result<T, StoreError>;

fn at<T>(path: &Path, r: io::Result<T>) -> Result<T> {
    r.map_err(|source| StoreError {
        path: path.to_path_buf(),
        source,
    })
}

fn corrupt(path: &Path, what: &str) -> StoreError {
    StoreError {
        path: path.to_path_buf(),
        source: io::Error::new(io::ErrorKind::InvalidData, what.to_string()),
    }
}

/// Metadata of one stored version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionMeta {
    pub version: u64,
    pub content_hash: String,
    pub created_at: String,
    pub fetch_snapshot: BTreeMap<String, Fetched>,
    pub warnings: Vec<String>,
}

impl VersionMeta {
    pub fn to_json(&self) -> Json {
        let snapshot = self.fetch_snapshot.iter().map(|(k, f)| {
            (
                k.as_str(),
                Json::object([
                    ("raw", Json::str(f.raw.as_str())),
                    ("fetched_at", Json::str(f.fetched_at.as_str())),
                ]),
            )
        });
        Json::object([
            ("version", Json::int(self.version)),
            ("content_hash", Json::str(self.content_hash.as_str())),
            ("created_at", Json::str(self.created_at.as_str())),
            ("fetch_snapshot", Json::object(snapshot)),
            (
                "warnings",
                Json::array(self.warnings.iter().map(|w| Json::str(w.as_str()))),
            ),
        ])
    }

    fn from_json(text: &str) -> Option<VersionMeta> {
        let v: serde_json::Value = serde_json::from_str(text).ok()?;
        let str_of = |v: &serde_json::Value, k: &str| v.get(k)?.as_str().map(String::from);
        let mut fetch_snapshot = BTreeMap::new();
        for (k, f) in v.get("fetch_snapshot")?.as_object()? {
            fetch_snapshot.insert(
                k.clone(),
                Fetched {
                    raw: str_of(f, "raw")?,
                    fetched_at: str_of(f, "fetched_at")?,
                },
            );
        }
        let warnings = v
            .get("warnings")?
            .as_array()?
            .iter()
            .map(|w| w.as_str().map(String::from))
            .collect::<Option<Vec<_>>>()?;
        Some(VersionMeta {
            version: v.get("version")?.as_u64()?,
            content_hash: str_of(&v, "content_hash")?,
            created_at: str_of(&v, "created_at")?,
            fetch_snapshot,
            warnings,
        })
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".into(),
    });
    let mut file = at(&tmp, fs::File::create(&tmp))?;
    at(&tmp, file.write_all(bytes))?;
    at(&tmp, file.sync_all())?;
    drop(file);
    at(path, fs::rename(&tmp, path))
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    /// Opens (creating if needed) a data directory, removes leftovers of
    /// interrupted writes and rebuilds the index.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let store = Store { root: root.into() };
        for dir in [store.services_dir(), store.vocabularies_dir()] {
            at(&dir, fs::create_dir_all(&dir))?;
        }
        for id in store.service_ids()? {
            store.sweep(&id)?;
        }
        store.write_index()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn services_dir(&self) -> PathBuf {
        self.root.join("services")
    }

    fn vocabularies_dir(&self) -> PathBuf {
        self.root.join("vocabularies")
    }

    fn service_dir(&self, id: &str) -> PathBuf {
        self.services_dir().join(id)
    }

    fn version_path(&self, id: &str, n: u64, ext: &str) -> PathBuf {
        self.service_dir(id).join(format!("v{n}.{ext}"))
    }

    /// Deletes temporary files and version files without a meta file.
    fn sweep(&self, id: &str) -> Result<()> {
        let dir = self.service_dir(id);
        for entry in at(&dir, fs::read_dir(&dir))? {
            let path = at(&dir, entry)?.path();
            let name = path
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let orphan = if name.ends_with(".tmp") {
                true
            } else if let Some(n) = version_of(&name) {
                !name.ends_with(".meta.json") && !self.version_path(id, n, "meta.json").exists()
            } else {
                false
            };
            if orphan {
                at(&path, fs::remove_file(&path))?;
            }
        }
        Ok(())
    }

    pub fn service_ids(&self) -> Result<Vec<String>> {
        let dir = self.services_dir();
        let mut ids = Vec::new();
        for entry in at(&dir, fs::read_dir(&dir))? {
            let entry = at(&dir, entry)?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Committed version numbers of a service, ascending.
    pub fn version_numbers(&self, id: &str) -> Result<Vec<u64>> {
        let dir = self.service_dir(id);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in at(&dir, fs::read_dir(&dir))? {
            let name = at(&dir, entry)?.file_name().to_string_lossy().into_owned();
            if name.ends_with(".meta.json") {
                if let Some(n) = version_of(&name) {
                    out.push(n);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn latest_version(&self, id: &str) -> Result<Option<u64>> {
        Ok(self.version_numbers(id)?.last().copied())
    }

    pub fn read_meta(&self, id: &str, n: u64) -> Result<VersionMeta> {
        let path = self.version_path(id, n, "meta.json");
        let text = at(&path, fs::read_to_string(&path))?;
        VersionMeta::from_json(&text).ok_or_else(|| corrupt(&path, "malformed version metadata"))
    }

    pub fn read_resolved(&self, id: &str, n: u64) -> Result<Vec<u8>> {
        let path = self.version_path(id, n, "json");
        at(&path, fs::read(&path))
    }

    pub fn read_version_source(&self, id: &str, n: u64) -> Result<String> {
        let path = self.version_path(id, n, "sdl");
        at(&path, fs::read_to_string(&path))
    }

    pub fn read_source(&self, id: &str) -> Result<String> {
        let path = self.service_dir(id).join("source.sdl");
        at(&path, fs::read_to_string(&path))
    }

    /// Appends version `meta.version`, which must follow the latest one.
    pub fn append_version(
        &self,
        id: &str,
        resolved: &[u8],
        source: &str,
        meta: &VersionMeta,
    ) -> Result<()> {
        let dir = self.service_dir(id);
        at(&dir, fs::create_dir_all(&dir))?;
        let expected = self.latest_version(id)?.unwrap_or(0) + 1;
        if meta.version != expected {
            return Err(corrupt(
                &dir,
                &format!("version {} does not follow {}", meta.version, expected - 1),
            ));
        }
        let n = meta.version;
        write_atomic(&self.version_path(id, n, "json"), resolved)?;
        write_atomic(&self.version_path(id, n, "sdl"), source.as_bytes())?;
        write_atomic(
            &self.version_path(id, n, "meta.json"),
            meta.to_json().to_text().as_bytes(),
        )?;
        self.write_source(id, source)
    }

    pub fn write_source(&self, id: &str, source: &str) -> Result<()> {
        write_atomic(&self.service_dir(id).join("source.sdl"), source.as_bytes())
    }

    pub fn is_deleted(&self, id: &str) -> bool {
        self.service_dir(id).join("tombstone").exists()
    }

    pub fn set_deleted(&self, id: &str, deleted: bool) -> Result<()> {
        let path = self.service_dir(id).join("tombstone");
        if deleted {
            let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
            write_atomic(&path, stamp.as_bytes())?;
        } else if path.exists() {
            at(&path, fs::remove_file(&path))?;
        }
        self.write_index()
    }

    pub fn write_vocabulary(&self, id: &str, source: &str) -> Result<()> {
        write_atomic(
            &self.vocabularies_dir().join(format!("{id}.sdl")),
            source.as_bytes(),
        )?;
        self.write_index()
    }

    /// Stored vocabulary sources by id.
    pub fn vocabularies(&self) -> Result<BTreeMap<String, String>> {
        let dir = self.vocabularies_dir();
        let mut out = BTreeMap::new();
        for entry in at(&dir, fs::read_dir(&dir))? {
            let path = at(&dir, entry)?.path();
            if path.extension().is_some_and(|e| e == "sdl") {
                let id = path
                    .file_stem()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                out.insert(id, at(&path, fs::read_to_string(&path))?);
            }
        }
        Ok(out)
    }

    /// Summary of the directory, for humans and external tools.
    pub fn write_index(&self) -> Result<()> {
        let mut services = BTreeMap::new();
        for id in self.service_ids()? {
            let latest = self.latest_version(&id)?;
            services.insert(
                id.clone(),
                Json::object([
                    ("latest", latest.map_or(Json::Null, Json::int)),
                    ("deleted", Json::Bool(self.is_deleted(&id))),
                ]),
            );
        }
        let vocabularies = self.vocabularies()?.into_keys().map(Json::str);
        let index = Json::object([
            ("services", Json::Object(services)),
            ("vocabularies", Json::array(vocabularies)),
        ]);
        write_atomic(&self.root.join("index.json"), index.to_text().as_bytes())
    }
}

/// `N` from `v<N>.<ext>`.
fn version_of(name: &str) -> Option<u64> {
    let rest = name.strip_prefix('v')?;
    let digits = rest.split('.').next()?;
    digits.parse().ok()
}
