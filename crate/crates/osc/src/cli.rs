//! The `osc` command line. Payload goes to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use osc_core::canonical;
use osc_core::sdl;

use crate::api::{self, AppState};
use crate::cache::{self, ResponseCache};
use crate::catalog::{match_jsonl, sdl_files, Catalog, LoadError, QueryError, Sources};
use crate::evaluator::{self, Evaluator, JobQueue};
use crate::fetch::{self, Allowlist, UreqClient};
use crate::repository::{RepoError, Repository};
use crate::store::Store;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Invalid input or a failed match.
    Failure = 1,
    Usage = 2,
    Io = 3,
}

#[derive(Debug, Parser)]
#[command(name = "osc", version, about = "Service compendium tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Json,
    Cheatsheet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and type-check source files.
    Validate {
        /// Extra vocabulary files or directories to check against.
        #[arg(long = "vocab")]
        vocab: Vec<PathBuf>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Print a service as canonical JSON or a vocabulary as a cheat sheet.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long = "vocab")]
        vocab: Vec<PathBuf>,
    },
    /// Rank the variants of a source directory against a request.
    Match {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        request: PathBuf,
    },
    /// Price one variant for a usage profile.
    Quote {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        service: String,
        /// Option ids joined by `/`; empty for services without dimensions.
        #[arg(long, default_value = "")]
        variant: String,
        #[arg(long)]
        usage: PathBuf,
    },
    /// Run the repository server until interrupted.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, env = "OSC_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Hosts fetch rules may reach: `host`, `host:port` or `*.domain`.
        #[arg(long, value_delimiter = ',')]
        allowlist: Vec<String>,
        #[arg(long, default_value_t = 2)]
        workers: usize,
        #[arg(long, value_enum, default_value = "on")]
        cache: Switch,
        /// Largest accepted request body in bytes.
        #[arg(long, default_value_t = api::DEFAULT_MAX_BODY)]
        max_body: usize,
        /// Fetch timeout in seconds.
        #[arg(long, default_value_t = fetch::DEFAULT_TIMEOUT.as_secs())]
        fetch_timeout: u64,
    },
    /// Undo the soft delete of a service.
    Restore {
        id: String,
        #[arg(long, env = "OSC_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Exit::Usage
            } else {
                Exit::Success
            };
        }
    };
    let serving = matches!(cli.command, Command::Serve { .. });
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| {
        tracing_subscriber::EnvFilter::new(if serving { "info" } else { "warn" })
    });
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
    match cli.command {
        Command::Validate { vocab, files } => validate(&vocab, &files),
        Command::Export {
            file,
            format,
            vocab,
        } => export(&file, format, &vocab),
        Command::Match { catalog, request } => run_match(&catalog, &request),
        Command::Quote {
            catalog,
            service,
            variant,
            usage,
        } => quote(&catalog, &service, &variant, &usage),
        Command::Serve {
            port,
            bind,
            data_dir,
            allowlist,
            workers,
            cache,
            max_body,
            fetch_timeout,
        } => serve(ServeConfig {
            port,
            bind,
            data_dir,
            allowlist,
            workers,
            cache: cache == Switch::On,
            max_body,
            fetch_timeout: Duration::from_secs(fetch_timeout.max(1)),
        }),
        Command::Restore { id, data_dir } => restore(&id, &data_dir),
    }
}

fn print(payload: &str) -> Exit {
    let mut out = std::io::stdout().lock();
    match out.write_all(payload.as_bytes()).and_then(|_| out.flush()) {
        Ok(()) => Exit::Success,
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Exit::Success,
        Err(e) => {
            eprintln!("osc: cannot write output: {e}");
            Exit::Io
        }
    }
}

fn load_error(e: LoadError) -> Exit {
    match e {
        LoadError::Io { .. } => {
            eprintln!("osc: {e}");
            Exit::Io
        }
        LoadError::Invalid(diags) => {
            for d in &diags {
                eprintln!("{d}");
            }
            Exit::Failure
        }
    }
}

fn query_error(e: &QueryError) -> Exit {
    eprintln!("osc: {e}");
    for d in e.details() {
        eprintln!("  {}", d.to_text());
    }
    Exit::Failure
}

/// Reads `files` after every vocabulary in `vocab`; directories are
/// searched for `.sdl` files.
fn read_sources(vocab: &[PathBuf], files: &[PathBuf]) -> Result<Sources, LoadError> {
    let mut paths = Vec::new();
    for p in vocab.iter().chain(files) {
        if p.is_dir() {
            paths.extend(sdl_files(p)?);
        } else {
            paths.push(p.clone());
        }
    }
    Sources::read(&paths)
}

fn validate(vocab: &[PathBuf], files: &[PathBuf]) -> Exit {
    let mut sources = match read_sources(vocab, files) {
        Ok(s) => s,
        Err(e) => return load_error(e),
    };
    sources.check();
    for d in &sources.diagnostics {
        eprintln!("{d}");
    }
    if sources.diagnostics.iter().any(|d| d.error.is_error()) {
        Exit::Failure
    } else {
        Exit::Success
    }
}

fn export(file: &Path, format: ExportFormat, vocab: &[PathBuf]) -> Exit {
    let mut sources = match read_sources(vocab, &[file.to_path_buf()]) {
        Ok(s) => s,
        Err(e) => return load_error(e),
    };
    let checked = sources.check();
    if sources.diagnostics.iter().any(|d| d.error.is_error()) {
        return load_error(LoadError::Invalid(sources.diagnostics));
    }
    let in_file = |p: &Path| p == file;
    let services: Vec<&str> = sources
        .services
        .iter()
        .filter(|(_, (p, _))| in_file(p))
        .map(|(id, _)| id.as_str())
        .collect();
    let vocabularies: Vec<&sdl::Vocabulary> = sources
        .vocabularies
        .values()
        .filter(|(p, _)| in_file(p))
        .map(|(_, v)| v)
        .collect();
    match (format, services.as_slice(), vocabularies.as_slice()) {
        (ExportFormat::Json, [id], _) => {
            let bytes = canonical::export_canonical_json(&checked[*id]);
            print(&String::from_utf8_lossy(&bytes))
        }
        (ExportFormat::Json, [], [v]) => print(&canonical::vocabulary_json(v).to_text()),
        (ExportFormat::Cheatsheet, _, [v]) => print(&sdl::export_cheatsheet(v)),
        (ExportFormat::Cheatsheet, [id], []) => {
            let vocab_id = &sources.services[*id].1.vocabulary_id;
            print(&sdl::export_cheatsheet(&sources.vocabularies[vocab_id].1))
        }
        _ => {
            eprintln!(
                "{}: export needs exactly one service or vocabulary in the file",
                file.display()
            );
            Exit::Failure
        }
    }
}

fn read_file(path: &Path) -> Result<String, Exit> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("osc: {}: {e}", path.display());
        Exit::Io
    })
}

fn load_catalog(dir: &Path) -> Result<Catalog, Exit> {
    if !dir.is_dir() {
        eprintln!("osc: {}: not a directory", dir.display());
        return Err(Exit::Io);
    }
    Catalog::load_dir(dir).map_err(load_error)
}

fn run_match(catalog: &Path, request: &Path) -> Exit {
    let (catalog, body) = match (load_catalog(catalog), read_file(request)) {
        (Ok(c), Ok(b)) => (c, b),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    match catalog.run_match(&body) {
        Ok(result) => print(&match_jsonl(&result)),
        Err(e) => query_error(&e),
    }
}

fn quote(catalog: &Path, service: &str, variant: &str, usage: &Path) -> Exit {
    let (catalog, body) = match (load_catalog(catalog), read_file(usage)) {
        (Ok(c), Ok(b)) => (c, b),
        (Err(e), _) | (_, Err(e)) => return e,
    };
    match catalog.quote(service, variant, &body) {
        Ok(json) => print(&(json.to_text() + "\n")),
        Err(e) => query_error(&e),
    }
}

fn restore(id: &str, data_dir: &Path) -> Exit {
    let repo = match Store::open(data_dir).and_then(Repository::open) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("osc: {e}");
            return Exit::Io;
        }
    };
    match repo.restore(id) {
        Ok(()) => Exit::Success,
        Err(RepoError::Query(e)) => query_error(&e),
        Err(RepoError::Store(e)) => {
            eprintln!("osc: {e}");
            Exit::Io
        }
    }
}

struct ServeConfig {
    port: u16,
    bind: IpAddr,
    data_dir: PathBuf,
    allowlist: Vec<String>,
    workers: usize,
    cache: bool,
    max_body: usize,
    fetch_timeout: Duration,
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = interrupt => {}
        _ = terminate => {}
    }
}

fn serve(config: ServeConfig) -> Exit {
    let repo = match Store::open(&config.data_dir).and_then(Repository::open) {
        Ok(r) => Arc::new(r),
        Err(e) => {
            eprintln!("osc: {e}");
            return Exit::Io;
        }
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(r) => r,
        Err(e) => {
            eprintln!("osc: cannot start runtime: {e}");
            return Exit::Io;
        }
    };
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind((config.bind, config.port)).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("osc: cannot listen on {}:{}: {e}", config.bind, config.port);
                return Exit::Io;
            }
        };
        let allowlist = Allowlist::new(&config.allowlist);
        if allowlist.is_empty() {
            tracing::warn!("fetch allowlist is empty; fetch rules will keep their static values");
        }
        let client = UreqClient::new(config.fetch_timeout, fetch::DEFAULT_MAX_BODY);
        let evaluator = Arc::new(Evaluator::new(repo.clone(), Arc::new(client), allowlist));
        let jobs = Arc::new(JobQueue::start(evaluator, config.workers));
        let stop = Arc::new(AtomicBool::new(false));
        let scheduler = evaluator::spawn_scheduler(
            repo.clone(),
            jobs.clone(),
            rand::random(),
            Duration::from_millis(500),
            stop.clone(),
        );
        let state = AppState {
            repo,
            jobs: jobs.clone(),
            cache: Arc::new(ResponseCache::new(config.cache, cache::DEFAULT_CAPACITY)),
        };
        match listener.local_addr() {
            Ok(addr) => eprintln!("osc: listening on http://{addr}"),
            Err(e) => tracing::warn!("local address unknown: {e}"),
        }
        let app = api::router(state, config.max_body);
        let served = axum::serve(listener, app)
            .with_graceful_shutdown(shutdown_signal())
            .await;
        tracing::info!("shutting down");
        stop.store(true, Ordering::SeqCst);
        let _ = tokio::task::spawn_blocking(move || {
            jobs.shutdown();
            let _ = scheduler.join();
        })
        .await;
        match served {
            Ok(()) => Exit::Success,
            Err(e) => {
                eprintln!("osc: server error: {e}");
                Exit::Io
            }
        }
    })
}
