//! Asynchronous evaluation of submitted sources.
//!
//! A job parses and checks a source, runs its fetch rules, overlays the
//! fetched values on the static ones and commits the result. Workers take
//! jobs in submission order but never run two jobs of one service at once.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use osc_core::canonical::Json;
use osc_core::sdl::{self, Origin, ParseError, ServiceDescription, Vocabulary};
use osc_core::variants;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::catalog::diagnostic_json;
use crate::fetch::{self, Allowlist, Fetched, HttpClient};
use crate::repository::{Committed, RepoError, Repository};

/// Parses `source`, which must hold exactly the service `service_id`, and
/// checks it against its vocabulary. Returns the normalised description.
pub fn prepare(
    service_id: &str,
    source: &str,
    vocabulary: &dyn Fn(&str) -> Option<Arc<Vocabulary>>,
) -> Result<(ServiceDescription, Arc<Vocabulary>), Vec<ParseError>> {
    let doc = sdl::parse_document(source)?;
    if let Some(v) = doc.vocabularies.first() {
        return Err(vec![ParseError::error(
            v.origin,
            "a service source must not define vocabularies",
        )]);
    }
    let mut services = doc.services.into_iter();
    let (Some(service), None) = (services.next(), services.next()) else {
        return Err(vec![ParseError::error(
            Origin::START,
            "expected exactly one service",
        )]);
    };
    if service.id != service_id {
        return Err(vec![ParseError::error(
            service.origin,
            format!("source describes `{}`, not `{service_id}`", service.id),
        )]);
    }
    let Some(vocab) = vocabulary(&service.vocabulary_id) else {
        return Err(vec![ParseError::error(
            service.origin,
            format!("unknown vocabulary `{}`", service.vocabulary_id),
        )]);
    };
    let normalized = sdl::check_service(&service, &vocab)?;
    let n = variants::count(&normalized);
    if n > variants::MAX_VARIANTS {
        return Err(vec![ParseError::error(
            service.origin,
            variants::VariantError::TooManyVariants { count: n }.to_string(),
        )]);
    }
    Ok((normalized, vocab))
}

/// Overlays fetched raw values on `desc`. A value that does not parse or
/// fit the property leaves the static value in place and yields a warning.
pub fn apply_snapshot(
    desc: &ServiceDescription,
    vocab: &Vocabulary,
    snapshot: &BTreeMap<String, Fetched>,
) -> (ServiceDescription, Vec<String>) {
    let mut out = desc.clone();
    let mut warnings = Vec::new();
    let base = desc.base_properties();
    for rule in &desc.fetch_rules {
        let Some(fetched) = snapshot.get(&rule.target) else {
            continue;
        };
        let Some(def) = vocab.property(&rule.target) else {
            continue;
        };
        let fallback = base.get(&rule.target).and_then(|v| v.currency());
        let typed = fetch::parse_raw(&fetched.raw, &rule.parse_as, fallback)
            .map_err(|e| e.to_string())
            .and_then(|v| sdl::coerce(&v, &def.ty, vocab));
        match typed {
            Ok(v) => out.set_property(&rule.target, v),
            Err(e) => warnings.push(format!("fetch `{}`: {e}; static value kept", rule.target)),
        }
    }
    (out, warnings)
}

/// Runs one evaluation synchronously.
pub struct Evaluator {
    repo: Arc<Repository>,
    client: Arc<dyn HttpClient>,
    allowlist: Allowlist,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Committed {
        committed: Committed,
        warnings: Vec<String>,
    },
    Rejected(Vec<ParseError>),
}

impl Evaluator {
    pub fn new(repo: Arc<Repository>, client: Arc<dyn HttpClient>, allowlist: Allowlist) -> Self {
        Evaluator {
            repo,
            client,
            allowlist,
        }
    }

    pub fn repository(&self) -> &Arc<Repository> {
        &self.repo
    }

    pub fn evaluate(&self, service_id: &str, source: &str) -> Result<Outcome, RepoError> {
        let (desc, vocab) = match prepare(service_id, source, &|v| self.repo.vocabulary(v)) {
            Ok(ok) => ok,
            Err(errors) => return Ok(Outcome::Rejected(errors)),
        };
        let fetched = fetch::run_fetchers(&desc, self.client.as_ref(), &self.allowlist);
        let mut warnings: Vec<String> = fetched
            .errors
            .iter()
            .map(|(target, e)| format!("fetch `{target}`: {e}; static value kept"))
            .collect();
        let (resolved, apply_warnings) = apply_snapshot(&desc, &vocab, &fetched.snapshot);
        warnings.extend(apply_warnings);
        let committed = self.repo.commit(
            service_id,
            source,
            resolved,
            fetched.snapshot,
            warnings.clone(),
        )?;
        Ok(Outcome::Committed {
            committed,
            warnings,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobState {
    Pending,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn as_str(self) -> &'static str {
        match self {
            JobState::Pending => "pending",
            JobState::Running => "running",
            JobState::Succeeded => "succeeded",
            JobState::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub job_id: String,
    pub service_id: String,
    pub state: JobState,
    /// Positioned problems; failures without a position use line 0.
    pub errors: Vec<ParseError>,
    pub warnings: Vec<String>,
    pub version: Option<u64>,
    pub changed: Option<bool>,
    pub submitted_at: String,
    pub finished_at: Option<String>,
}

impl Job {
    pub fn to_json(&self) -> Json {
        let opt_str = |s: &Option<String>| s.as_deref().map_or(Json::Null, Json::str);
        Json::object([
            ("job_id", Json::str(self.job_id.as_str())),
            ("service_id", Json::str(self.service_id.as_str())),
            ("state", Json::str(self.state.as_str())),
            (
                "errors",
                Json::array(self.errors.iter().map(diagnostic_json)),
            ),
            (
                "warnings",
                Json::array(self.warnings.iter().map(|w| Json::str(w.as_str()))),
            ),
            ("version", self.version.map_or(Json::Null, Json::int)),
            ("changed", self.changed.map_or(Json::Null, Json::Bool)),
            ("submitted_at", Json::str(self.submitted_at.as_str())),
            ("finished_at", opt_str(&self.finished_at)),
        ])
    }
}

fn now_stamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct Pending {
    job_id: String,
    service_id: String,
    source: String,
}

#[derive(Default)]
struct QueueState {
    pending: VecDeque<Pending>,
    in_flight: HashSet<String>,
    jobs: HashMap<String, Job>,
    shutdown: bool,
}

struct Shared {
    state: Mutex<QueueState>,
    /// Signalled when work arrives, a service frees up, or a job finishes.
    changed: Condvar,
}

/// In-memory job queue served by a pool of worker threads.
pub struct JobQueue {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl JobQueue {
    pub fn start(evaluator: Arc<Evaluator>, workers: usize) -> JobQueue {
        let shared = Arc::new(Shared {
            state: Mutex::new(QueueState::default()),
            changed: Condvar::new(),
        });
        let handles = (0..workers.max(1))
            .map(|i| {
                let shared = shared.clone();
                let evaluator = evaluator.clone();
                std::thread::Builder::new()
                    .name(format!("osc-worker-{i}"))
                    .spawn(move || worker(&shared, &evaluator))
                    .expect("spawning a worker thread")
            })
            .collect();
        JobQueue {
            shared,
            workers: Mutex::new(handles),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, QueueState> {
        self.shared.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Enqueues an evaluation and returns the pending job at once.
    pub fn submit(&self, service_id: &str, source: String) -> Job {
        let job = Job {
            job_id: uuid::Uuid::new_v4().to_string(),
            service_id: service_id.to_string(),
            state: JobState::Pending,
            errors: Vec::new(),
            warnings: Vec::new(),
            version: None,
            changed: None,
            submitted_at: now_stamp(),
            finished_at: None,
        };
        let mut state = self.lock();
        state.jobs.insert(job.job_id.clone(), job.clone());
        state.pending.push_back(Pending {
            job_id: job.job_id.clone(),
            service_id: service_id.to_string(),
            source,
        });
        drop(state);
        self.shared.changed.notify_all();
        job
    }

    pub fn get(&self, job_id: &str) -> Option<Job> {
        self.lock().jobs.get(job_id).cloned()
    }

    /// Blocks until the job is terminal or `timeout` passes.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Option<Job> {
        let deadline = Instant::now() + timeout;
        let mut state = self.lock();
        loop {
            let job = state.jobs.get(job_id)?.clone();
            let now = Instant::now();
            if job.state.is_terminal() || now >= deadline {
                return Some(job);
            }
            state = self
                .shared
                .changed
                .wait_timeout(state, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    /// Jobs waiting or running.
    pub fn backlog(&self) -> usize {
        let state = self.lock();
        state.pending.len() + state.in_flight.len()
    }

    /// Whether a job for `service_id` is queued or running.
    pub fn has_work_for(&self, service_id: &str) -> bool {
        let state = self.lock();
        state.in_flight.contains(service_id)
            || state.pending.iter().any(|p| p.service_id == service_id)
    }

    /// Lets running jobs finish, then stops the workers. Jobs still queued
    /// are dropped.
    pub fn shutdown(&self) {
        self.lock().shutdown = true;
        self.shared.changed.notify_all();
        let handles = std::mem::take(&mut *self.workers.lock().unwrap_or_else(|e| e.into_inner()));
        for h in handles {
            let _ = h.join();
        }
    }
}

impl Drop for JobQueue {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn worker(shared: &Shared, evaluator: &Evaluator) {
    loop {
        let next = {
            let mut state = shared.state.lock().unwrap_or_else(|e| e.into_inner());
            loop {
                if state.shutdown {
                    return;
                }
                let free = state
                    .pending
                    .iter()
                    .position(|p| !state.in_flight.contains(&p.service_id));
                if let Some(i) = free {
                    let p = state.pending.remove(i).expect("index from position");
                    state.in_flight.insert(p.service_id.clone());
                    if let Some(job) = state.jobs.get_mut(&p.job_id) {
                        job.state = JobState::Running;
                    }
                    break p;
                }
                state = shared
                    .changed
                    .wait(state)
                    .unwrap_or_else(|e| e.into_inner());
            }
        };
        let result = evaluator.evaluate(&next.service_id, &next.source);
        let mut state = shared.state.lock().unwrap_or_else(|e| e.into_inner());
        state.in_flight.remove(&next.service_id);
        if let Some(job) = state.jobs.get_mut(&next.job_id) {
            job.finished_at = Some(now_stamp());
            match result {
                Ok(Outcome::Committed {
                    committed,
                    warnings,
                }) => {
                    job.state = JobState::Succeeded;
                    job.version = Some(committed.version);
                    job.changed = Some(committed.changed);
                    job.warnings = warnings;
                }
                Ok(Outcome::Rejected(errors)) => {
                    job.state = JobState::Failed;
                    job.errors = errors;
                }
                Err(e) => {
                    tracing::error!(service = %next.service_id, "evaluation failed: {e}");
                    job.state = JobState::Failed;
                    job.errors = vec![ParseError::error(Origin::new(0, 0), e.to_string())];
                }
            }
        }
        drop(state);
        shared.changed.notify_all();
    }
}

/// Decides when services with fetch rules are re-evaluated. Time is passed
/// in explicitly (seconds since an arbitrary origin), so tests can drive it.
pub struct Scheduler {
    rng: StdRng,
    entries: BTreeMap<String, (u64, f64)>,
}

impl Scheduler {
    pub fn new(seed: u64) -> Self {
        Scheduler {
            rng: StdRng::seed_from_u64(seed),
            entries: BTreeMap::new(),
        }
    }

    /// Next delay for `interval`: between 90% and 100% of it, so a service
    /// is never refreshed less often than its rules ask for.
    fn delay(&mut self, interval: u64) -> f64 {
        interval as f64 * self.rng.random_range(0.9..=1.0)
    }

    /// Adds or updates a service; an unchanged interval keeps its due time.
    pub fn register(&mut self, id: &str, interval_secs: u64, now: f64) {
        if self
            .entries
            .get(id)
            .is_some_and(|(i, _)| *i == interval_secs)
        {
            return;
        }
        let due = now + self.delay(interval_secs);
        self.entries.insert(id.to_string(), (interval_secs, due));
    }

    pub fn unregister(&mut self, id: &str) {
        self.entries.remove(id);
    }

    /// Makes the registered set equal `wanted` (id to interval).
    pub fn reconcile(&mut self, wanted: &BTreeMap<String, u64>, now: f64) {
        self.entries.retain(|id, _| wanted.contains_key(id));
        for (id, interval) in wanted {
            self.register(id, *interval, now);
        }
    }

    pub fn next_due(&self, id: &str) -> Option<f64> {
        self.entries.get(id).map(|(_, due)| *due)
    }

    /// Services due at `now`, each rescheduled one jittered interval later.
    pub fn due(&mut self, now: f64) -> Vec<String> {
        let due: Vec<(String, u64)> = self
            .entries
            .iter()
            .filter(|(_, (_, at))| *at <= now)
            .map(|(id, (interval, _))| (id.clone(), *interval))
            .collect();
        for (id, interval) in &due {
            let next = now + self.delay(*interval);
            self.entries.insert(id.clone(), (*interval, next));
        }
        due.into_iter().map(|(id, _)| id).collect()
    }
}

/// Re-submits services with fetch rules when they fall due. A failed fetch
/// is simply retried at the next due time.
pub fn spawn_scheduler(
    repo: Arc<Repository>,
    jobs: Arc<JobQueue>,
    seed: u64,
    tick: Duration,
    stop: Arc<std::sync::atomic::AtomicBool>,
) -> JoinHandle<()> {
    std::thread::Builder::new()
        .name("osc-scheduler".into())
        .spawn(move || {
            let start = Instant::now();
            let mut scheduler = Scheduler::new(seed);
            while !stop.load(std::sync::atomic::Ordering::SeqCst) {
                let now = start.elapsed().as_secs_f64();
                scheduler.reconcile(&repo.scheduled(), now);
                for id in scheduler.due(now) {
                    if jobs.has_work_for(&id) {
                        continue;
                    }
                    match repo.latest_source(&id) {
                        Ok(source) => {
                            tracing::debug!(service = %id, "scheduled refresh");
                            jobs.submit(&id, source);
                        }
                        Err(e) => tracing::warn!(service = %id, "cannot read source: {e}"),
                    }
                }
                std::thread::sleep(tick);
            }
        })
        .expect("spawning the scheduler thread")
}
