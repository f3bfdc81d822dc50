//! Job-queue QPU service.
//!
//! A single worker thread drains a FIFO of queue entries. An entry is either
//! one job or a whole session; the configured latency is paid once per entry
//! before it starts, modelling the wait of a shared remote queue. Session jobs
//! run back to back, so no other job can interleave with them.
//!
//! Wire protocol:
//!
//! | request | response |
//! |---|---|
//! | `POST /jobs` [`JobRequest`] | `{"id"}` or 400 `{"error", "line"}` |
//! | `GET /jobs/{id}` | [`JobView`] or 404 |
//! | `POST /sessions` `{"jobs": [JobRequest]}` | `{"id"}` |
//! | `GET /sessions/{id}` | `{"jobs": [JobView]}` or 404 |

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::future::Future;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hqc_core::accel::{exact_counts, sample, NoiseModel};
use hqc_core::ir::Kernel;
use hqc_core::{parse, resolve_calls};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::config::NoiseDoc;
use crate::error::{Error, Result};

/// How the server turns a kernel into counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Deterministic counts apportioned from the exact distribution; seed and
    /// readout noise are ignored.
    Exact,
    /// Seeded shot sampling with optional readout noise, identical to local
    /// `sample` for the same arguments.
    #[default]
    Sampling,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "sampling" => Ok(Backend::Sampling),
            other => Err(Error::Usage(format!("unknown backend `{other}` (expected exact or sampling)"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Sampling => "sampling",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// Wait applied before each queue entry (job or session) starts.
    pub latency: Duration,
    pub backend: Backend,
    /// Used for jobs that do not carry their own noise model.
    pub noise: Option<NoiseModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    /// Assembly text.
    pub program: String,
    /// Entry kernel; must be fully bound after call resolution.
    pub kernel: String,
    pub shots: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

/// Client-visible job state. Timestamps are milliseconds since server start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobView {
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<BTreeMap<String, u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub enqueued_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRequest {
    pub jobs: Vec<JobRequest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub jobs: Vec<JobView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdResponse {
    pub id: String,
}

/// Body of a 400 response. `line` is 0 when the problem has no source line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub line: u32,
}

/// A request rejected before queueing.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub message: String,
    pub line: u32,
}

impl From<Error> for Rejection {
    fn from(e: Error) -> Self {
        let line = match &e {
            Error::Core(hqc_core::Error::Syntax { location, .. }) => location.line,
            _ => 0,
        };
        Rejection { message: e.to_string(), line }
    }
}

#[derive(Debug, Clone)]
struct Prepared {
    kernel: Kernel,
    shots: u64,
    seed: u64,
    noise: Option<NoiseModel>,
}

/// Parses and resolves a request into an executable kernel.
fn prepare(request: &JobRequest) -> Result<Prepared> {
    let program = parse(&request.program)?;
    let kernel = resolve_calls(&program, &request.kernel)?;
    let kernel = kernel.bind_parameters(&BTreeMap::new())?;
    let noise = request.noise.as_ref().map(NoiseDoc::to_model).transpose()?;
    Ok(Prepared { kernel, shots: request.shots, seed: request.seed, noise })
}

#[derive(Debug)]
struct Job {
    work: std::result::Result<Prepared, String>,
    status: JobStatus,
    counts: Option<BTreeMap<String, u64>>,
    error: Option<String>,
    enqueued: Instant,
    started: Option<Instant>,
    finished: Option<Instant>,
}

impl Job {
    fn new(work: std::result::Result<Prepared, String>) -> Self {
        Job { work, status: JobStatus::Queued, counts: None, error: None, enqueued: Instant::now(), started: None, finished: None }
    }
}

enum Entry {
    Job(String),
    Session(String),
}

#[derive(Default)]
struct Registry {
    jobs: HashMap<String, Job>,
    sessions: HashMap<String, Vec<String>>,
    queue: VecDeque<Entry>,
    shutdown: bool,
}

struct Shared {
    config: ServerConfig,
    epoch: Instant,
    registry: Mutex<Registry>,
    wake: Condvar,
}

impl Shared {
    fn lock(&self) -> MutexGuard<'_, Registry> {
        // A panic while holding the lock cannot leave the registry half-updated
        // in a way later readers would misinterpret, so recover the guard.
        self.registry.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn millis(&self, t: Instant) -> f64 {
        t.duration_since(self.epoch).as_secs_f64() * 1e3
    }

    fn view(&self, job: &Job) -> JobView {
        JobView {
            status: job.status,
            counts: job.counts.clone(),
            error: job.error.clone(),
            enqueued_ms: self.millis(job.enqueued),
            started_ms: job.started.map(|t| self.millis(t)),
            finished_ms: job.finished.map(|t| self.millis(t)),
        }
    }
}

/// The queue and its worker thread. Cloning shares the same queue.
#[derive(Clone)]
pub struct Server {
    shared: Arc<Shared>,
    worker: Arc<Mutex<Option<JoinHandle<()>>>>,
}

impl Server {
    pub fn new(config: ServerConfig) -> Self {
        let shared = Arc::new(Shared { config, epoch: Instant::now(), registry: Mutex::default(), wake: Condvar::new() });
        let worker_shared = Arc::clone(&shared);
        let worker = std::thread::Builder::new()
            .name("qpu-worker".into())
            .spawn(move || worker_loop(&worker_shared))
            .expect("spawning the worker thread");
        Server { shared, worker: Arc::new(Mutex::new(Some(worker))) }
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    /// Validates and enqueues one job.
    pub fn submit(&self, request: &JobRequest) -> std::result::Result<String, Rejection> {
        let prepared = prepare(request).map_err(Rejection::from)?;
        let id = uuid::Uuid::new_v4().to_string();
        let mut reg = self.shared.lock();
        reg.jobs.insert(id.clone(), Job::new(Ok(prepared)));
        reg.queue.push_back(Entry::Job(id.clone()));
        drop(reg);
        info!(job = %id, status = "QUEUED", "job submitted");
        self.shared.wake.notify_one();
        Ok(id)
    }

    /// Enqueues a session. Members that fail validation are kept and reported
    /// as FAILED when the session runs.
    pub fn submit_session(&self, requests: &[JobRequest]) -> String {
        let session = uuid::Uuid::new_v4().to_string();
        let jobs: Vec<(String, Job)> = requests
            .iter()
            .map(|r| (uuid::Uuid::new_v4().to_string(), Job::new(prepare(r).map_err(|e| e.to_string()))))
            .collect();
        let mut reg = self.shared.lock();
        let ids = jobs.iter().map(|(id, _)| id.clone()).collect();
        reg.jobs.extend(jobs);
        reg.sessions.insert(session.clone(), ids);
        reg.queue.push_back(Entry::Session(session.clone()));
        drop(reg);
        info!(session = %session, jobs = requests.len(), status = "QUEUED", "session submitted");
        self.shared.wake.notify_one();
        session
    }

    pub fn job(&self, id: &str) -> Option<JobView> {
        let reg = self.shared.lock();
        reg.jobs.get(id).map(|j| self.shared.view(j))
    }

    pub fn session(&self, id: &str) -> Option<SessionView> {
        let reg = self.shared.lock();
        let ids = reg.sessions.get(id)?;
        Some(SessionView { jobs: ids.iter().map(|j| self.shared.view(&reg.jobs[j])).collect() })
    }

    /// HTTP routes over this queue.
    pub fn router(&self) -> Router {
        Router::new()
            .route("/jobs", post(post_job))
            .route("/jobs/{id}", get(get_job))
            .route("/sessions", post(post_session))
            .route("/sessions/{id}", get(get_session))
            .with_state(self.clone())
    }

    /// Serves HTTP on `listener` until `shutdown` resolves, then stops the worker.
    pub async fn serve(self, listener: tokio::net::TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<()> {
        let result = axum::serve(listener, self.router()).with_graceful_shutdown(shutdown).await;
        self.stop();
        result.map_err(|e| Error::Server(e.to_string()))
    }

    /// Stops the worker after the entry it is running, if any.
    pub fn stop(&self) {
        self.shared.lock().shutdown = true;
        self.shared.wake.notify_all();
        let handle = self.worker.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            let _ = h.join();
        }
    }
}

fn worker_loop(shared: &Shared) {
    loop {
        let entry = {
            let mut reg = shared.lock();
            loop {
                if reg.shutdown {
                    return;
                }
                if let Some(e) = reg.queue.pop_front() {
                    break e;
                }
                reg = shared.wake.wait(reg).unwrap_or_else(|e| e.into_inner());
            }
        };
        if !shared.config.latency.is_zero() {
            std::thread::sleep(shared.config.latency);
        }
        let ids = match entry {
            Entry::Job(id) => vec![id],
            Entry::Session(sid) => {
                info!(session = %sid, status = "RUNNING", "session started");
                shared.lock().sessions.get(&sid).cloned().unwrap_or_default()
            }
        };
        for id in ids {
            run_job(shared, &id);
        }
    }
}

fn run_job(shared: &Shared, id: &str) {
    let work = {
        let mut reg = shared.lock();
        let Some(job) = reg.jobs.get_mut(id) else { return };
        job.status = JobStatus::Running;
        job.started = Some(Instant::now());
        job.work.clone()
    };
    info!(job = %id, status = "RUNNING");

    let outcome = work.and_then(|p| {
        let noise = p.noise.as_ref().or(shared.config.noise.as_ref());
        let buffer = match shared.config.backend {
            Backend::Sampling => sample(&p.kernel, p.shots, p.seed, noise),
            Backend::Exact => exact_counts(&p.kernel, p.shots),
        };
        buffer.map(|b| b.counts).map_err(|e| e.to_string())
    });

    let mut reg = shared.lock();
    let Some(job) = reg.jobs.get_mut(id) else { return };
    job.finished = Some(Instant::now());
    match outcome {
        Ok(counts) => {
            job.status = JobStatus::Done;
            job.counts = Some(counts);
            drop(reg);
            info!(job = %id, status = "DONE");
        }
        Err(message) => {
            job.status = JobStatus::Failed;
            job.error = Some(message.clone());
            drop(reg);
            warn!(job = %id, status = "FAILED", error = %message);
        }
    }
}

fn bad_request(message: String, line: u32) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody { error: message, line })).into_response()
}

fn not_found(what: &str, id: &str) -> Response {
    (StatusCode::NOT_FOUND, Json(ErrorBody { error: format!("unknown {what} `{id}`"), line: 0 })).into_response()
}

async fn post_job(State(server): State<Server>, body: std::result::Result<Json<JobRequest>, JsonRejection>) -> Response {
    let Json(request) = match body {
        Ok(b) => b,
        Err(e) => return bad_request(e.body_text(), 0),
    };
    match server.submit(&request) {
        Ok(id) => Json(IdResponse { id }).into_response(),
        Err(r) => bad_request(r.message, r.line),
    }
}

async fn get_job(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.job(&id) {
        Some(view) => Json(view).into_response(),
        None => not_found("job", &id),
    }
}

async fn post_session(State(server): State<Server>, body: std::result::Result<Json<SessionRequest>, JsonRejection>) -> Response {
    match body {
        Ok(Json(request)) => Json(IdResponse { id: server.submit_session(&request.jobs) }).into_response(),
        Err(e) => bad_request(e.body_text(), 0),
    }
}

async fn get_session(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.session(&id) {
        Some(view) => Json(view).into_response(),
        None => not_found("session", &id),
    }
}

/// A server running on a background thread; stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Server,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<Result<()>>>,
}

impl ServerHandle {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn spawn(addr: SocketAddr, config: ServerConfig) -> Result<Self> {
        let listener = std::net::TcpListener::bind(addr).map_err(|e| Error::Server(format!("binding {addr}: {e}")))?;
        listener.set_nonblocking(true).map_err(|e| Error::Server(e.to_string()))?;
        let addr = listener.local_addr().map_err(|e| Error::Server(e.to_string()))?;
        let server = Server::new(config);
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let serving = server.clone();
        let thread = std::thread::Builder::new()
            .name("qpu-http".into())
            .spawn(move || -> Result<()> {
                let runtime = tokio::runtime::Builder::new_multi_thread()
                    .worker_threads(2)
                    .enable_all()
                    .build()
                    .map_err(|e| Error::Server(e.to_string()))?;
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener).map_err(|e| Error::Server(e.to_string()))?;
                    serving
                        .serve(listener, async {
                            let _ = rx.await;
                        })
                        .await
                })
            })
            .map_err(|e| Error::Server(e.to_string()))?;
        info!(%addr, "server listening");
        Ok(ServerHandle { addr, server, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:41234`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// In-process access to the same queue.
    pub fn server(&self) -> &Server {
        &self.server
    }

    /// Stops accepting requests and waits for the threads to finish.
    pub fn shutdown(mut self) -> Result<()> {
        self.stop_inner()
    }

    fn stop_inner(&mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.server.stop();
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(Error::Server("server thread panicked".into())),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_inner();
    }
}
