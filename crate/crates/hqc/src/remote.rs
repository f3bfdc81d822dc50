//! [`Accelerator`] backed by a job-queue server.

use std::time::{Duration, Instant};

use hqc_core::accel::{Accelerator, AcceleratorBuffer, ExecutionRequest, NoiseModel};
use hqc_core::ir::{Kernel, Program};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::NoiseDoc;
use crate::error::{Error, Result};
use crate::server::{ErrorBody, IdResponse, JobRequest, JobStatus, JobView, SessionRequest, SessionView};

/// Polling and retry knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteOptions {
    /// First poll delay; doubles after every non-terminal poll.
    pub poll_initial: Duration,
    pub poll_max: Duration,
    /// Attempts per HTTP request before giving up on transport errors.
    pub attempts: u32,
    pub retry_delay: Duration,
    /// Give up on a job that has not finished after this long.
    pub deadline: Duration,
}

impl Default for RemoteOptions {
    fn default() -> Self {
        Self {
            poll_initial: Duration::from_millis(10),
            poll_max: Duration::from_millis(500),
            attempts: 3,
            retry_delay: Duration::from_millis(50),
            deadline: Duration::from_secs(600),
        }
    }
}

pub struct RemoteAccelerator {
    base: String,
    agent: ureq::Agent,
    noise: Option<NoiseModel>,
    options: RemoteOptions,
    name: String,
}

impl RemoteAccelerator {
    pub fn new(base_url: impl Into<String>) -> Self {
        let base = base_url.into().trim_end_matches('/').to_string();
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        let name = format!("remote:{base}");
        Self { base, agent, noise: None, options: RemoteOptions::default(), name }
    }

    /// Readout noise to request for every job.
    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_options(mut self, options: RemoteOptions) -> Self {
        self.options = options;
        self
    }

    fn job_request(&self, kernel: &Kernel, shots: u64, seed: u64) -> Result<JobRequest> {
        let program = Program::new(vec![kernel.clone()])?;
        Ok(JobRequest {
            program: program.to_assembly(),
            kernel: kernel.name.clone(),
            shots,
            seed,
            noise: self.noise.as_ref().map(NoiseDoc::from_model),
        })
    }

    fn with_retries<T>(&self, what: &str, mut call: impl FnMut() -> std::result::Result<T, ureq::Error>) -> Result<T> {
        let mut delay = self.options.retry_delay;
        let mut last = String::new();
        for attempt in 0..self.options.attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match call() {
                Ok(v) => return Ok(v),
                Err(e) => last = e.to_string(),
            }
        }
        Err(Error::Transport(format!("{what}: {last} (after {} attempts)", self.options.attempts.max(1))))
    }

    fn decode<T: DeserializeOwned>(what: &str, mut response: ureq::http::Response<ureq::Body>) -> Result<T> {
        let status = response.status().as_u16();
        if status == 200 {
            return response.body_mut().read_json::<T>().map_err(|e| Error::Transport(format!("{what}: {e}")));
        }
        let detail = match response.body_mut().read_json::<ErrorBody>() {
            Ok(b) if b.line > 0 => format!("{} (line {})", b.error, b.line),
            Ok(b) => b.error,
            Err(_) => String::from("no details"),
        };
        Err(Error::Server(format!("{what}: HTTP {status}: {detail}")))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let response = self.with_retries(&format!("POST {url}"), || self.agent.post(&url).send_json(body))?;
        Self::decode(&format!("POST {path}"), response)
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T> {
        let url = format!("{}{path}", self.base);
        let response = self.with_retries(&format!("GET {url}"), || self.agent.get(&url).call())?;
        Self::decode(&format!("GET {path}"), response)
    }

    /// Polls `path` with exponential backoff until `done` holds.
    fn poll<T: DeserializeOwned>(&self, path: &str, done: impl Fn(&T) -> bool) -> Result<T> {
        let start = Instant::now();
        let mut delay = self.options.poll_initial;
        loop {
            let view: T = self.get(path)?;
            if done(&view) {
                return Ok(view);
            }
            if start.elapsed() > self.options.deadline {
                return Err(Error::Transport(format!("GET {path}: not finished after {:?}", self.options.deadline)));
            }
            std::thread::sleep(delay);
            delay = (delay * 2).min(self.options.poll_max);
        }
    }

    /// Submits one job and waits for its counts.
    pub fn submit_and_wait(&self, kernel: &Kernel, shots: u64, seed: u64) -> Result<AcceleratorBuffer> {
        let request = self.job_request(kernel, shots, seed)?;
        let IdResponse { id } = self.post("/jobs", &request)?;
        let view: JobView = self.poll(&format!("/jobs/{id}"), |v: &JobView| v.status.is_terminal())?;
        to_buffer(kernel, shots, view)
    }

    /// Submits all requests as one session and waits for every member.
    pub fn run_session(&self, requests: &[ExecutionRequest]) -> Result<Vec<AcceleratorBuffer>> {
        let jobs = requests.iter().map(|r| self.job_request(&r.kernel, r.shots, r.seed)).collect::<Result<Vec<_>>>()?;
        let IdResponse { id } = self.post("/sessions", &SessionRequest { jobs })?;
        let view: SessionView =
            self.poll(&format!("/sessions/{id}"), |v: &SessionView| v.jobs.iter().all(|j| j.status.is_terminal()))?;
        requests.iter().zip(view.jobs).map(|(r, v)| to_buffer(&r.kernel, r.shots, v)).collect()
    }
}

fn to_buffer(kernel: &Kernel, shots: u64, view: JobView) -> Result<AcceleratorBuffer> {
    match view.status {
        JobStatus::Done => Ok(AcceleratorBuffer {
            qubit_count: kernel.width(),
            shots,
            counts: view.counts.unwrap_or_default(),
            measured_qubits: kernel.measurements().into_iter().map(|(q, _)| q).collect(),
            metadata: Default::default(),
        }),
        _ => Err(Error::RemoteJob(view.error.unwrap_or_else(|| "no message".into()))),
    }
}

impl Accelerator for RemoteAccelerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn execute(&self, kernel: &Kernel, shots: u64, seed: u64) -> hqc_core::Result<AcceleratorBuffer> {
        Ok(self.submit_and_wait(kernel, shots, seed)?)
    }

    /// One session per batch, so the queue wait is paid once.
    fn execute_batch(&self, requests: &[ExecutionRequest]) -> hqc_core::Result<Vec<AcceleratorBuffer>> {
        if requests.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.run_session(requests)?)
    }
}
