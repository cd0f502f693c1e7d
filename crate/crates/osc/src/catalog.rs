//! The set of current descriptions and vocabularies, and the read
//! operations over it. The server keeps one behind its repository; the
//! command line builds one from a directory of sources. Both produce their
//! output through the same functions, so their bytes agree.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use osc_core::canonical::{self, Json};
use osc_core::facets::{self, FacetSelection};
use osc_core::matchmaker::{self, MatchError, MatchResult, RequestError};
use osc_core::pricing::{self, PricingError};
use osc_core::sdl::{self, ParseError, ServiceDescription, Vocabulary};
use osc_core::variants::{self, ResolvedVariant, VariantError};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::wire;

/// Request-level failure, mapped to an HTTP status by the API and to an
/// exit code by the command line.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("{0}")]
    NotFound(String),
    #[error("{message}")]
    Invalid { message: String, details: Vec<Json> },
    #[error("{message}")]
    Conflict { message: String, details: Vec<Json> },
    #[error("{0}")]
    Unprocessable(String),
}

impl QueryError {
    pub fn invalid(message: impl Into<String>, details: Vec<Json>) -> Self {
        QueryError::Invalid {
            message: message.into(),
            details,
        }
    }

    pub fn details(&self) -> &[Json] {
        match self {
            QueryError::Invalid { details, .. } | QueryError::Conflict { details, .. } => details,
            _ => &[],
        }
    }

    pub fn to_json(&self) -> Json {
        error_json(&self.to_string(), self.details())
    }
}

pub fn error_json(message: &str, details: &[Json]) -> Json {
    Json::object([
        ("error", Json::str(message)),
        ("details", Json::Array(details.to_vec())),
    ])
}

pub fn diagnostic_json(e: &ParseError) -> Json {
    Json::object([
        ("line", Json::int(e.line)),
        ("column", Json::int(e.column)),
        ("message", Json::str(e.message.as_str())),
        ("severity", Json::str(e.severity.as_str())),
    ])
}

pub fn request_error_json(e: &RequestError) -> Json {
    Json::object([
        ("path", Json::str(e.path.as_str())),
        ("message", Json::str(e.message.as_str())),
    ])
}

fn request_errors(message: &str, errors: &[RequestError]) -> QueryError {
    QueryError::invalid(message, errors.iter().map(request_error_json).collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One current description with its expansion precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceEntry {
    /// Resolved and normalised description.
    pub description: ServiceDescription,
    pub variants: Vec<ResolvedVariant>,
    pub canonical: Vec<u8>,
    pub content_hash: String,
    /// Stored version, 0 for descriptions that were never stored.
    pub version: u64,
    pub deleted: bool,
}

impl ServiceEntry {
    pub fn new(description: ServiceDescription, version: u64) -> Result<Self, VariantError> {
        let variants = variants::expand(&description)?;
        let canonical = canonical::export_canonical_json(&description);
        let content_hash = sha256_hex(&canonical);
        Ok(ServiceEntry {
            description,
            variants,
            canonical,
            content_hash,
            version,
            deleted: false,
        })
    }

    pub fn id(&self) -> &str {
        &self.description.id
    }

    pub fn summary_json(&self) -> Json {
        Json::object([
            ("id", Json::str(self.id())),
            (
                "vocabulary",
                Json::str(self.description.vocabulary_id.as_str()),
            ),
            ("version", Json::int(self.version)),
            ("content_hash", Json::str(self.content_hash.as_str())),
            ("variant_count", Json::int(self.variants.len() as u64)),
            (
                "properties",
                canonical::properties_json(&self.description.base_properties()),
            ),
        ])
    }
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    pub vocabularies: BTreeMap<String, Arc<Vocabulary>>,
    pub services: BTreeMap<String, Arc<ServiceEntry>>,
}

impl Catalog {
    fn live(&self) -> impl Iterator<Item = &ServiceEntry> {
        self.services
            .values()
            .map(|e| e.as_ref())
            .filter(|e| !e.deleted)
    }

    fn live_in<'a>(&'a self, vocabulary: &'a str) -> impl Iterator<Item = &'a ServiceEntry> {
        self.live()
            .filter(move |e| e.description.vocabulary_id == vocabulary)
    }

    pub fn live_service(&self, id: &str) -> Result<&ServiceEntry, QueryError> {
        self.services
            .get(id)
            .map(|e| e.as_ref())
            .filter(|e| !e.deleted)
            .ok_or_else(|| QueryError::NotFound(format!("unknown service `{id}`")))
    }

    /// The named vocabulary, or the only one when none is named. `None` when
    /// the catalog has no vocabularies at all, so an empty catalog answers
    /// every query with an empty result.
    pub fn active_vocabulary(
        &self,
        requested: Option<&str>,
    ) -> Result<Option<&Arc<Vocabulary>>, QueryError> {
        if self.vocabularies.is_empty() {
            return Ok(None);
        }
        match requested {
            Some(id) => self.vocabularies.get(id).map(Some).ok_or_else(|| {
                QueryError::invalid(format!("unknown vocabulary `{id}`"), Vec::new())
            }),
            None => match self.vocabularies.len() {
                1 => Ok(self.vocabularies.values().next()),
                _ => Err(QueryError::invalid(
                    "several vocabularies exist; name one with `vocabulary`",
                    Vec::new(),
                )),
            },
        }
    }

    /// Validates and runs a match request over every live variant of the
    /// active vocabulary.
    pub fn run_match(&self, body: &str) -> Result<MatchResult, QueryError> {
        let query = wire::parse_match_request(body)
            .map_err(|e| request_errors("invalid match request", &e))?;
        let Some(vocab) = self.active_vocabulary(query.vocabulary.as_deref())? else {
            return Ok(MatchResult::default());
        };
        matchmaker::validate_request(&query.request, vocab)
            .map_err(|e| request_errors("invalid match request", &e))?;
        let variants: Vec<ResolvedVariant> = self
            .live_in(&vocab.id)
            .flat_map(|e| e.variants.iter().cloned())
            .collect();
        matchmaker::rank(&variants, &query.request).map_err(|e| match e {
            MatchError::MixedCurrencies { .. } => QueryError::Unprocessable(e.to_string()),
            MatchError::Variants { .. } => QueryError::Unprocessable(e.to_string()),
        })
    }

    fn selection_vocabulary(
        &self,
        vocabulary: Option<&str>,
        selection: &FacetSelection,
    ) -> Result<Option<&Arc<Vocabulary>>, QueryError> {
        let vocab = self.active_vocabulary(vocabulary)?;
        if let Some(v) = vocab {
            facets::validate_selection(selection, v)
                .map_err(|e| request_errors("invalid facet selection", &e))?;
        } else if !selection.is_empty() {
            return Err(QueryError::invalid(
                "no vocabulary to filter by",
                Vec::new(),
            ));
        }
        Ok(vocab)
    }

    /// Summaries of live services, optionally restricted to one vocabulary
    /// and to services with a variant passing `selection`.
    pub fn list_services(
        &self,
        vocabulary: Option<&str>,
        selection: &FacetSelection,
    ) -> Result<Json, QueryError> {
        if vocabulary.is_none() && selection.is_empty() {
            return Ok(Json::array(self.live().map(ServiceEntry::summary_json)));
        }
        let Some(vocab) = self.selection_vocabulary(vocabulary, selection)? else {
            return Ok(Json::Array(Vec::new()));
        };
        let listed = self
            .live_in(&vocab.id)
            .filter(|e| {
                e.variants
                    .iter()
                    .any(|v| facets::variant_matches(v, selection))
            })
            .map(ServiceEntry::summary_json);
        Ok(Json::array(listed))
    }

    pub fn facets(
        &self,
        vocabulary: Option<&str>,
        selection: &FacetSelection,
    ) -> Result<Json, QueryError> {
        let Some(vocab) = self.selection_vocabulary(vocabulary, selection)? else {
            return Ok(Json::object([
                ("vocabulary", Json::Null),
                ("facets", Json::object::<&str>([])),
            ]));
        };
        let variants: Vec<&ResolvedVariant> = self
            .live_in(&vocab.id)
            .flat_map(|e| e.variants.iter())
            .collect();
        let counts = facets::compute_facets(variants.iter().copied(), vocab, selection);
        let facets = counts.iter().map(|(p, values)| {
            (
                p.as_str(),
                Json::object(values.iter().map(|(v, n)| (v.as_str(), Json::int(*n)))),
            )
        });
        Ok(Json::object([
            ("vocabulary", Json::str(vocab.id.as_str())),
            ("facets", Json::object(facets)),
        ]))
    }

    pub fn variants_json(&self, id: &str) -> Result<Json, QueryError> {
        let entry = self.live_service(id)?;
        Ok(Json::array(
            entry.variants.iter().map(canonical::variant_json),
        ))
    }

    pub fn quote(&self, id: &str, variant_id: &str, usage_body: &str) -> Result<Json, QueryError> {
        let entry = self.live_service(id)?;
        let variant = entry
            .variants
            .iter()
            .find(|v| v.variant_id == variant_id)
            .ok_or_else(|| {
                QueryError::NotFound(format!("service `{id}` has no variant `{variant_id}`"))
            })?;
        let usage = wire::parse_usage(usage_body)
            .map_err(|e| request_errors("invalid usage profile", &e))?;
        let quote = pricing::quote(variant, &usage).map_err(|e| match e {
            PricingError::MixedCurrencies { .. } => QueryError::Unprocessable(e.to_string()),
            PricingError::Overflow => QueryError::Unprocessable(e.to_string()),
            _ => QueryError::invalid(e.to_string(), Vec::new()),
        })?;
        let Json::Object(mut fields) = canonical::quote_json(&quote, &variant.price_components)
        else {
            unreachable!("quotes serialise as objects")
        };
        fields.insert("service_id".into(), Json::str(id));
        fields.insert("variant_id".into(), Json::str(variant_id));
        fields.insert("horizon_months".into(), Json::int(usage.horizon_months));
        Ok(Json::Object(fields))
    }
}

pub fn match_json(result: &MatchResult) -> Json {
    Json::object([
        (
            "ranked",
            Json::array(result.ranked.iter().map(canonical::ranked_json)),
        ),
        ("excluded_count", Json::int(result.excluded_count as u64)),
    ])
}

/// One ranked variant per line.
pub fn match_jsonl(result: &MatchResult) -> String {
    let mut out = String::new();
    for r in &result.ranked {
        canonical::ranked_json(r).write(&mut out);
        out.push('\n');
    }
    out
}

/// A diagnostic tied to the file it was found in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileDiagnostic {
    pub path: PathBuf,
    pub error: ParseError,
}

impl std::fmt::Display for FileDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}: {}",
            self.path.display(),
            self.error.line,
            self.error.column,
            self.error.severity.as_str(),
            self.error.message
        )
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} problem(s) in catalog sources", .0.len())]
    Invalid(Vec<FileDiagnostic>),
}

/// Every `.sdl` file below `dir`, sorted by path.
pub fn sdl_files(dir: &Path) -> Result<Vec<PathBuf>, LoadError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).map_err(|source| LoadError::Io {
            path: d.clone(),
            source,
        })?;
        for entry in entries {
            let path = entry
                .map_err(|source| LoadError::Io {
                    path: d.clone(),
                    source,
                })?
                .path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "sdl") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Parsed contents of a set of source files, before type checking.
#[derive(Debug, Default)]
pub struct Sources {
    pub vocabularies: BTreeMap<String, (PathBuf, Vocabulary)>,
    pub services: BTreeMap<String, (PathBuf, ServiceDescription)>,
    pub diagnostics: Vec<FileDiagnostic>,
}

impl Sources {
    pub fn read(paths: &[PathBuf]) -> Result<Sources, LoadError> {
        let mut out = Sources::default();
        for path in paths {
            let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
            out.add(path, &text);
        }
        Ok(out)
    }

    pub fn add(&mut self, path: &Path, text: &str) {
        let diag = |error: ParseError| FileDiagnostic {
            path: path.to_path_buf(),
            error,
        };
        match sdl::parse_document(text) {
            Err(errors) => self.diagnostics.extend(errors.into_iter().map(diag)),
            Ok(doc) => {
                for v in doc.vocabularies {
                    if self.vocabularies.contains_key(&v.id) {
                        self.diagnostics.push(diag(ParseError::error(
                            v.origin,
                            format!("vocabulary `{}` defined twice", v.id),
                        )));
                    } else {
                        self.vocabularies
                            .insert(v.id.clone(), (path.to_path_buf(), v));
                    }
                }
                for s in doc.services {
                    if self.services.contains_key(&s.id) {
                        self.diagnostics.push(diag(ParseError::error(
                            s.origin,
                            format!("service `{}` defined twice", s.id),
                        )));
                    } else {
                        self.services.insert(s.id.clone(), (path.to_path_buf(), s));
                    }
                }
            }
        }
    }

    /// Type-checks every service against the vocabularies read so far.
    /// Returns the normalised descriptions; problems go to `diagnostics`.
    pub fn check(&mut self) -> BTreeMap<String, ServiceDescription> {
        let mut out = BTreeMap::new();
        for (id, (path, service)) in &self.services {
            let diag = |error: ParseError| FileDiagnostic {
                path: path.clone(),
                error,
            };
            let Some((_, vocab)) = self.vocabularies.get(&service.vocabulary_id) else {
                self.diagnostics.push(diag(ParseError::error(
                    service.origin,
                    format!("unknown vocabulary `{}`", service.vocabulary_id),
                )));
                continue;
            };
            match sdl::check_service(service, vocab) {
                Ok(normalized) => {
                    let n = variants::count(&normalized);
                    if n > variants::MAX_VARIANTS {
                        self.diagnostics.push(diag(ParseError::error(
                            service.origin,
                            VariantError::TooManyVariants { count: n }.to_string(),
                        )));
                    } else {
                        out.insert(id.clone(), normalized);
                    }
                }
                Err(errors) => self.diagnostics.extend(errors.into_iter().map(diag)),
            }
        }
        out
    }
}

impl Catalog {
    /// Builds a catalog from every `.sdl` file below `dir`, using static
    /// values only (no fetching).
    pub fn load_dir(dir: &Path) -> Result<Catalog, LoadError> {
        let mut sources = Sources::read(&sdl_files(dir)?)?;
        let checked = sources.check();
        if sources.diagnostics.iter().any(|d| d.error.is_error()) {
            return Err(LoadError::Invalid(sources.diagnostics));
        }
        let mut catalog = Catalog::default();
        for (id, (_, v)) in sources.vocabularies {
            catalog.vocabularies.insert(id, Arc::new(v));
        }
        for (id, desc) in checked {
            let entry = ServiceEntry::new(desc, 0).map_err(|e| {
                LoadError::Invalid(vec![FileDiagnostic {
                    path: dir.to_path_buf(),
                    error: ParseError::error(sdl::Origin::START, e.to_string()),
                }])
            })?;
            catalog.services.insert(id, Arc::new(entry));
        }
        Ok(catalog)
    }
}
