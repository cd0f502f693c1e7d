//! Helpers shared by the integration tests: a stub HTTP endpoint for
//! fetch rules, an in-process server and a small HTTP client.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use osc::api::{self, AppState};
use osc::cache::ResponseCache;
use osc::evaluator::{Evaluator, Job, JobQueue, JobState};
use osc::fetch::{Allowlist, UreqClient};
use osc::repository::Repository;
use osc::store::Store;

pub fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref())
        .unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// A one-route HTTP server answering every GET with the current body.
pub struct Stub {
    pub addr: String,
    body: Arc<Mutex<(u16, String)>>,
    hits: Arc<AtomicUsize>,
}

impl Stub {
    pub fn start(body: &str) -> Stub {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let state = Arc::new(Mutex::new((200, body.to_string())));
        let hits = Arc::new(AtomicUsize::new(0));
        let (s, h) = (state.clone(), hits.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                loop {
                    line.clear();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                }
                h.fetch_add(1, Ordering::SeqCst);
                let (status, body) = s.lock().unwrap().clone();
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        Stub {
            addr,
            body: state,
            hits,
        }
    }

    pub fn set(&self, body: &str) {
        self.body.lock().unwrap().1 = body.to_string();
    }

    pub fn set_status(&self, status: u16) {
        self.body.lock().unwrap().0 = status;
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

/// Repository, job queue and HTTP API running in this process.
pub struct TestServer {
    pub base: String,
    pub repo: Arc<Repository>,
    pub jobs: Arc<JobQueue>,
    pub data: PathBuf,
    runtime: Option<tokio::runtime::Runtime>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
}

pub struct ServerOptions {
    pub allowlist: Vec<String>,
    pub cache: bool,
    pub workers: usize,
    pub max_body: usize,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            allowlist: Vec::new(),
            cache: true,
            workers: 2,
            max_body: api::DEFAULT_MAX_BODY,
        }
    }
}

impl TestServer {
    pub fn start(data: &Path, options: ServerOptions) -> TestServer {
        let repo = Arc::new(Repository::open(Store::open(data).unwrap()).unwrap());
        let client = UreqClient::new(Duration::from_secs(5), 1 << 20);
        let evaluator = Arc::new(Evaluator::new(
            repo.clone(),
            Arc::new(client),
            Allowlist::new(&options.allowlist),
        ));
        let jobs = Arc::new(JobQueue::start(evaluator, options.workers));
        let state = AppState {
            repo: repo.clone(),
            jobs: jobs.clone(),
            cache: Arc::new(ResponseCache::new(options.cache, 1024)),
        };
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let app = api::router(state, options.max_body);
        runtime.spawn(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        });
        TestServer {
            base,
            repo,
            jobs,
            data: data.to_path_buf(),
            runtime: Some(runtime),
            shutdown: Some(tx),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Submits a source over HTTP and waits for its job to finish.
    pub fn put_service(&self, id: &str, source: &str) -> Job {
        let (status, body) = put(&self.url(&format!("/services/{id}")), source);
        assert_eq!(status, 202, "{body}");
        let job_id = serde_json::from_str::<serde_json::Value>(&body).unwrap()["job_id"]
            .as_str()
            .unwrap()
            .to_string();
        let job = self.jobs.wait(&job_id, Duration::from_secs(30)).unwrap();
        assert!(
            job.state == JobState::Succeeded || job.state == JobState::Failed,
            "{job:?}"
        );
        job
    }

    pub fn put_vocabulary(&self, id: &str, source: &str) {
        let (status, body) = put(&self.url(&format!("/vocabularies/{id}")), source);
        assert_eq!(status, 200, "{body}");
    }

    /// Loads every corpus vocabulary and service.
    pub fn load_corpus(&self) {
        for (id, path) in sdl_sources("vocabularies") {
            self.put_vocabulary(&id, &read(path));
        }
        for (id, path) in sdl_sources("services") {
            let job = self.put_service(&id, &read(&path));
            assert_eq!(job.state, JobState::Succeeded, "{job:?}");
        }
    }

    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.jobs.shutdown();
        if let Some(rt) = self.runtime.take() {
            rt.shutdown_timeout(Duration::from_secs(5));
        }
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.halt();
    }
}

/// `(id, path)` of the `.sdl` files in a corpus subdirectory, sorted.
pub fn sdl_sources(dir: &str) -> Vec<(String, PathBuf)> {
    let mut out: Vec<_> = std::fs::read_dir(corpus().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "sdl"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    out.sort();
    out
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into()
}

fn finish(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, String) {
    let mut r = r.unwrap();
    let status = r.status().as_u16();
    let body = r
        .body_mut()
        .with_config()
        .limit(64 << 20)
        .read_to_string()
        .unwrap();
    (status, body)
}

pub fn get(url: &str) -> (u16, String) {
    finish(agent().get(url).call())
}

pub fn put(url: &str, body: &str) -> (u16, String) {
    finish(agent().put(url).send(body))
}

pub fn post(url: &str, body: &str) -> (u16, String) {
    finish(agent().post(url).send(body))
}

pub fn delete(url: &str) -> (u16, String) {
    finish(agent().delete(url).call())
}

pub fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("{e}: {text}"))
}
