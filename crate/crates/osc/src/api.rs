//! HTTP/JSON interface over the repository. Read endpoints go through the
//! response cache; writes are queued as evaluation jobs.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, RawQuery, State};
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use osc_core::canonical::Json;
use osc_core::facets::FacetSelection;

use crate::cache::{cache_key, CachedResponse, ResponseCache};
use crate::catalog::{error_json, match_json, match_jsonl, QueryError};
use crate::evaluator::JobQueue;
use crate::repository::{check_id, RepoError, Repository};

pub const JSON: &str = "application/json";
pub const JSON_LINES: &str = "application/x-ndjson";
pub const DEFAULT_MAX_BODY: usize = 1024 * 1024;

#[derive(Clone)]
pub struct AppState {
    pub repo: Arc<Repository>,
    pub jobs: Arc<JobQueue>,
    pub cache: Arc<ResponseCache>,
}

/// An error response: status plus `{"error","details"}` body.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Json,
}

impl ApiError {
    fn new(status: StatusCode, message: &str) -> Self {
        ApiError {
            status,
            body: error_json(message, &[]),
        }
    }

    fn not_found(message: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
}

pub fn query_status(e: &QueryError) -> StatusCode {
    match e {
        QueryError::NotFound(_) => StatusCode::NOT_FOUND,
        QueryError::Invalid { .. } => StatusCode::BAD_REQUEST,
        QueryError::Conflict { .. } => StatusCode::CONFLICT,
        QueryError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        ApiError {
            status: query_status(&e),
            body: e.to_json(),
        }
    }
}

impl From<RepoError> for ApiError {
    fn from(e: RepoError) -> Self {
        match e {
            RepoError::Query(q) => q.into(),
            RepoError::Store(s) => {
                tracing::error!("store: {s}");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage failure")
            }
        }
    }
}

impl From<BytesRejection> for ApiError {
    fn from(e: BytesRejection) -> Self {
        let status = e.status();
        let message = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "request body too large".to_string()
        } else {
            e.body_text()
        };
        ApiError::new(status, &message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        respond(self.status, JSON, self.body.to_text())
    }
}

fn respond(status: StatusCode, content_type: &'static str, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, content_type)], body).into_response()
}

type ApiResult = Result<Response, ApiError>;

fn utf8(body: &Bytes) -> Result<String, ApiError> {
    String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "body is not UTF-8 text"))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> T + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        tracing::error!("request task failed: {e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
    })
}

/// Serves a read from the cache or computes it. The generation is read
/// before computing, so a concurrent write leaves a stale tag behind.
async fn cached_read(
    state: &AppState,
    method: &Method,
    uri: &Uri,
    body: &[u8],
    compute: impl FnOnce(&Repository) -> Result<CachedResponse, ApiError> + Send + 'static,
) -> ApiResult {
    let key = cache_key(method.as_str(), uri.path(), uri.query().unwrap_or(""), body);
    let generation = state.repo.generation();
    if let Some(hit) = state.cache.get(&key, generation) {
        return Ok(respond(StatusCode::OK, hit.content_type, hit.body));
    }
    let repo = state.repo.clone();
    let computed = blocking(move || compute(&repo)).await??;
    state.cache.put(key, generation, computed.clone());
    Ok(respond(
        StatusCode::OK,
        computed.content_type,
        computed.body,
    ))
}

fn json_ok(j: Json) -> CachedResponse {
    CachedResponse {
        content_type: JSON,
        body: j.to_text(),
    }
}

/// Splits a query string into the vocabulary and the facet selection.
/// Values of one property may repeat or be comma-separated.
pub fn parse_facet_query(query: Option<&str>) -> (Option<String>, FacetSelection) {
    let mut vocabulary = None;
    let mut selection = FacetSelection::new();
    for (k, v) in url::form_urlencoded::parse(query.unwrap_or("").as_bytes()) {
        if k == "vocabulary" {
            vocabulary = Some(v.into_owned());
            continue;
        }
        let values = selection.entry(k.into_owned()).or_default();
        values.extend(
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from),
        );
    }
    (vocabulary, selection)
}

async fn list_services(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    RawQuery(q): RawQuery,
) -> ApiResult {
    let (vocabulary, selection) = parse_facet_query(q.as_deref());
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(
            repo.catalog()
                .list_services(vocabulary.as_deref(), &selection)?,
        ))
    })
    .await
}

async fn facets(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    RawQuery(q): RawQuery,
) -> ApiResult {
    let (vocabulary, selection) = parse_facet_query(q.as_deref());
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(
            repo.catalog().facets(vocabulary.as_deref(), &selection)?,
        ))
    })
    .await
}

async fn get_service(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path(id): Path<String>,
) -> ApiResult {
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(repo.get_service(&id, None)?))
    })
    .await
}

async fn get_version(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path((id, n)): Path<(String, String)>,
) -> ApiResult {
    let n: u64 = n
        .parse()
        .map_err(|_| ApiError::not_found(&format!("service `{id}` has no version {n}")))?;
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(repo.get_service(&id, Some(n))?))
    })
    .await
}

async fn history(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path(id): Path<String>,
) -> ApiResult {
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(repo.history(&id)?))
    })
    .await
}

async fn variants(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path(id): Path<String>,
) -> ApiResult {
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(repo.catalog().variants_json(&id)?))
    })
    .await
}

/// `/services/{id}/variants/{variant_id}/quote`, where the variant id joins
/// option ids with `/` and is empty for services without dimensions.
async fn quote(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path((id, rest)): Path<(String, String)>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let variant_id = match rest.strip_suffix("quote") {
        Some("") => String::new(),
        Some(v) if v.ends_with('/') => v[..v.len() - 1].to_string(),
        _ => return Err(ApiError::not_found("no such endpoint")),
    };
    let body = body?;
    let text = utf8(&body)?;
    cached_read(&state, &method, &uri, &body, move |repo| {
        Ok(json_ok(repo.catalog().quote(&id, &variant_id, &text)?))
    })
    .await
}

/// Ranked variants as one JSON document, or with `?format=jsonl` one line
/// per variant, the same bytes `osc match` prints.
async fn run_match(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    RawQuery(q): RawQuery,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let mut lines = false;
    for (k, v) in url::form_urlencoded::parse(q.as_deref().unwrap_or("").as_bytes()) {
        match (k.as_ref(), v.as_ref()) {
            ("format", "jsonl") => lines = true,
            ("format", "json") => lines = false,
            _ => {
                return Err(ApiError::new(
                    StatusCode::BAD_REQUEST,
                    &format!("unknown query parameter `{k}={v}`"),
                ))
            }
        }
    }
    let body = body?;
    let text = utf8(&body)?;
    cached_read(&state, &method, &uri, &body, move |repo| {
        let result = repo.catalog().run_match(&text)?;
        Ok(if lines {
            CachedResponse {
                content_type: JSON_LINES,
                body: match_jsonl(&result),
            }
        } else {
            json_ok(match_json(&result))
        })
    })
    .await
}

async fn put_service(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    check_id(&id)?;
    let source = utf8(&body?)?;
    let job = state.jobs.submit(&id, source);
    Ok(respond(StatusCode::ACCEPTED, JSON, job.to_json().to_text()))
}

async fn delete_service(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let repo = state.repo.clone();
    let id2 = id.clone();
    blocking(move || repo.delete(&id2)).await??;
    let body = Json::object([("id", Json::str(id)), ("deleted", Json::Bool(true))]);
    Ok(respond(StatusCode::OK, JSON, body.to_text()))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let job = state
        .jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(&format!("unknown job `{id}`")))?;
    Ok(respond(StatusCode::OK, JSON, job.to_json().to_text()))
}

async fn get_vocabulary(
    State(state): State<AppState>,
    method: Method,
    uri: Uri,
    Path(id): Path<String>,
) -> ApiResult {
    cached_read(&state, &method, &uri, b"", move |repo| {
        Ok(json_ok(repo.get_vocabulary(&id)?))
    })
    .await
}

async fn put_vocabulary(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult {
    let source = utf8(&body?)?;
    let repo = state.repo.clone();
    let json = blocking(move || repo.put_vocabulary(&id, &source)).await??;
    Ok(respond(StatusCode::OK, JSON, json.to_text()))
}

async fn fallback() -> ApiError {
    ApiError::not_found("no such endpoint")
}

pub fn router(state: AppState, max_body: usize) -> Router {
    Router::new()
        .route("/services", get(list_services))
        .route(
            "/services/{id}",
            get(get_service).put(put_service).delete(delete_service),
        )
        .route("/services/{id}/history", get(history))
        .route("/services/{id}/versions/{n}", get(get_version))
        .route("/services/{id}/variants", get(variants))
        .route("/services/{id}/variants/{*rest}", post(quote))
        .route("/jobs/{id}", get(get_job))
        .route(
            "/vocabularies/{id}",
            get(get_vocabulary).put(put_vocabulary),
        )
        .route("/facets", get(facets))
        .route("/match", post(run_match))
        .fallback(fallback)
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}
