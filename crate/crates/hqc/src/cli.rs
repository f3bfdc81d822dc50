//! Command-line interface. Each subcommand is a thin composition of library
//! calls; all data goes to the writer passed to [`execute`], diagnostics are
//! returned as errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hqc_core::accel::{Accelerator, LocalSimulator, NoiseModel};
use hqc_core::dag::CircuitDag;
use hqc_core::ir::{Kernel, OpKind, Program};
use hqc_core::passes::{run_pipeline, NativeGateSet, PassPipeline, Topology};
use hqc_core::vqe::{linspace, minimize, parse_hamiltonian, sweep, EnergyOptions, EnergyPoint, VqeResult};
use hqc_core::{parse, resolve_calls};

use crate::config::{load_noise, load_topology};
use crate::error::{read_file, Error, Result};
use crate::remote::RemoteAccelerator;
use crate::serial;
use crate::server::{Backend, Server, ServerConfig};

#[derive(Debug, Parser)]
#[command(name = "hqc", version, about = "Compile, run and serve quantum kernels; run the deuteron VQE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve, optionally bind and transform a kernel, then emit it.
    Compile(CompileArgs),
    /// Execute a kernel and print its counts as JSON.
    Run(RunArgs),
    /// Energy sweep or minimization for a Pauli Hamiltonian.
    Vqe(VqeArgs),
    /// Serve the job-queue HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Asm,
    Json,
    Dot,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Assembly source file.
    pub file: PathBuf,
    #[arg(long)]
    pub kernel: String,
    /// Coupling map file; defaults to all-to-all over the kernel's qubits.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// `default` (RX, RZ, CNOT, MEASURE) or a comma-separated list of mnemonics.
    #[arg(long, default_value = "default")]
    pub native: String,
    /// Comma-separated passes, applied in the given order: cancel, merge, route, lower.
    #[arg(long, value_delimiter = ',')]
    pub passes: Vec<String>,
    #[arg(long, value_enum, default_value = "asm")]
    pub emit: Emit,
    /// Parameter binding `name=value`; repeatable.
    #[arg(long = "bind", value_name = "NAME=VALUE")]
    pub bind: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub kernel: String,
    #[arg(long = "bind", value_name = "NAME=VALUE")]
    pub bind: Vec<String>,
    #[arg(long)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Readout-noise file.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// `local` or the base URL of a running server.
    #[arg(long, default_value = "local")]
    pub backend: String,
}

#[derive(Debug, Args)]
pub struct VqeArgs {
    /// Pauli Hamiltonian file, one `coefficient operators` term per line.
    #[arg(long)]
    pub hamiltonian: PathBuf,
    /// Assembly file containing the ansatz kernel.
    #[arg(long)]
    pub ansatz: PathBuf,
    #[arg(long, default_value = "ansatz")]
    pub ansatz_kernel: String,
    /// `start:end:points`, inclusive of both ends.
    #[arg(long, conflicts_with = "minimize", required_unless_present = "minimize")]
    pub sweep: Option<String>,
    #[arg(long)]
    pub minimize: bool,
    /// Comma-separated initial parameters for `--minimize` (default all zero).
    #[arg(long, value_delimiter = ',', requires = "minimize")]
    pub init: Vec<f64>,
    /// Shots per kernel; 0 computes exact expectation values.
    #[arg(long, default_value_t = 0)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub noise: Option<PathBuf>,
    /// Apply readout-error mitigation.
    #[arg(long)]
    pub mitigate: bool,
    /// Shots per calibration kernel; defaults to `--shots`.
    #[arg(long)]
    pub calibration_shots: Option<u64>,
    /// Measure qubit-wise commuting terms with a shared kernel.
    #[arg(long)]
    pub grouped: bool,
    #[arg(long, default_value = "local")]
    pub backend: String,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Artificial wait before each queued job or session starts.
    #[arg(long, default_value_t = 0)]
    pub latency_ms: u64,
    #[arg(long, default_value = "sampling")]
    pub backend: Backend,
    /// Default readout-noise file for jobs that carry none.
    #[arg(long)]
    pub noise: Option<PathBuf>,
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Compile(a) => emit(&compile(&a)?, a.out.as_deref(), stdout),
        Command::Run(a) => {
            let text = run(&a)?;
            emit(&text, None, stdout)
        }
        Command::Vqe(a) => emit(&vqe(&a)?, a.out.as_deref(), stdout),
        Command::Serve(a) => serve(&a),
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Parses `name=value` pairs.
pub fn parse_bindings(items: &[String]) -> Result<BTreeMap<String, f64>> {
    items
        .iter()
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("binding `{item}` is not NAME=VALUE")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("binding `{item}`: `{value}` is not a number")))?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

/// Parses a source file and resolves `kernel`, binding parameters when any
/// bindings are given.
pub fn load_kernel(path: &Path, kernel: &str, bindings: &BTreeMap<String, f64>) -> Result<Kernel> {
    let program = parse(&read_file(path)?).map_err(|e| located(path, e))?;
    let resolved = resolve_calls(&program, kernel)?;
    if bindings.is_empty() {
        Ok(resolved)
    } else {
        Ok(resolved.bind_parameters(bindings)?)
    }
}

fn located(path: &Path, e: hqc_core::Error) -> Error {
    match e {
        hqc_core::Error::Syntax { location, message } => {
            Error::Usage(format!("{}:{location}: {message}", path.display()))
        }
        other => other.into(),
    }
}

pub fn parse_native(spec: &str) -> Result<NativeGateSet> {
    if spec == "default" {
        return Ok(NativeGateSet::default());
    }
    let kinds = spec
        .split(',')
        .map(|m| {
            let m = m.trim().to_ascii_uppercase();
            OpKind::from_mnemonic(&m).ok_or_else(|| Error::Usage(format!("unknown gate `{m}` in --native")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NativeGateSet::new(kinds)?)
}

fn compile(a: &CompileArgs) -> Result<String> {
    let kernel = load_kernel(&a.file, &a.kernel, &parse_bindings(&a.bind)?)?;
    let kernel = if a.passes.is_empty() {
        kernel
    } else {
        let topology = match &a.topology {
            Some(path) => load_topology(path)?,
            None => Topology::fully_connected(kernel.width().max(1))?,
        };
        let pipeline = PassPipeline::from_names(a.passes.iter().map(String::as_str))?;
        let compiled = run_pipeline(kernel, &pipeline, &topology, &parse_native(&a.native)?)?;
        if !compiled.final_layout.is_identity() {
            eprintln!("final layout (logical -> physical): {:?}", compiled.final_layout.as_slice());
        }
        compiled.kernel
    };
    Ok(match a.emit {
        Emit::Asm => Program::new(vec![kernel])?.to_assembly(),
        Emit::Json => serial::to_json(&Program::new(vec![kernel])?),
        Emit::Dot => CircuitDag::from_kernel(&kernel)?.to_dot(&kernel.name),
    })
}

fn load_optional_noise(path: Option<&Path>) -> Result<Option<NoiseModel>> {
    path.map(load_noise).transpose()
}

/// `local` or an `http://` URL.
pub fn accelerator(backend: &str, noise: Option<NoiseModel>) -> Result<Box<dyn Accelerator>> {
    if backend == "local" {
        return Ok(Box::new(match noise {
            Some(n) => LocalSimulator::with_noise(n),
            None => LocalSimulator::new(),
        }));
    }
    if backend.starts_with("http://") {
        let remote = RemoteAccelerator::new(backend);
        return Ok(Box::new(match noise {
            Some(n) => remote.with_noise(n),
            None => remote,
        }));
    }
    Err(Error::Usage(format!("--backend must be `local` or an http:// URL, got `{backend}`")))
}

fn run(a: &RunArgs) -> Result<String> {
    let kernel = load_kernel(&a.file, &a.kernel, &parse_bindings(&a.bind)?)?;
    let kernel = kernel.bind_parameters(&BTreeMap::new())?;
    let acc = accelerator(&a.backend, load_optional_noise(a.noise.as_deref())?)?;
    let buffer = acc.execute(&kernel, a.shots, a.seed)?;
    let mut text = serde_json::to_string(&buffer.counts).expect("counts serialize");
    text.push('\n');
    Ok(text)
}

/// `start:end:points`.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("--sweep `{spec}` is not start:end:points"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, n] = parts.as_slice() else { return Err(bad()) };
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let end: f64 = end.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    Ok(linspace(start, end, n))
}

fn vqe(a: &VqeArgs) -> Result<String> {
    let h = parse_hamiltonian(&read_file(&a.hamiltonian)?)?;
    let ansatz = load_kernel(&a.ansatz, &a.ansatz_kernel, &BTreeMap::new())?;
    let acc = accelerator(&a.backend, load_optional_noise(a.noise.as_deref())?)?;
    let opts = EnergyOptions {
        shots: a.shots,
        seed: a.seed,
        mitigate: a.mitigate,
        grouped: a.grouped,
        calibration_shots: a.calibration_shots,
    };
    if a.minimize {
        let init = if a.init.is_empty() { vec![0.0; ansatz.params.len()] } else { a.init.clone() };
        let result = minimize(&h, &ansatz, acc.as_ref(), &opts, &init)?;
        minimum_csv(&result)
    } else {
        let grid = parse_sweep(a.sweep.as_deref().unwrap_or_default())?;
        let points = sweep(&grid, &h, &ansatz, acc.as_ref(), &opts)?;
        sweep_csv(&points)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn number(v: f64) -> String {
    format!("{v}")
}

/// Columns: `theta`, `energy_raw`, `energy_mitigated`, one raw column per
/// term, one `<term>_mitigated` column per term when mitigating, then
/// `p0_q<k>` / `p1_q<k>` calibration estimates.
pub fn sweep_csv(points: &[EnergyPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let Some(first) = points.first() else { return finish_csv(w) };
    let mitigated = first.energy_mitigated.is_some();
    let calibrated: Vec<usize> = first.calibration.iter().flat_map(|c| c.qubits.keys().copied()).collect();

    let mut header = vec!["theta".to_string(), "energy_raw".into(), "energy_mitigated".into()];
    header.extend(first.terms.iter().map(|t| t.term.to_string()));
    if mitigated {
        header.extend(first.terms.iter().map(|t| format!("{}_mitigated", t.term)));
    }
    for q in &calibrated {
        header.push(format!("p0_q{q}"));
        header.push(format!("p1_q{q}"));
    }
    w.write_record(&header)?;

    for p in points {
        let theta = p.theta.iter().map(|v| number(*v)).collect::<Vec<_>>().join(";");
        let mut row = vec![theta, number(p.energy_raw), p.energy_mitigated.map(number).unwrap_or_default()];
        row.extend(p.terms.iter().map(|t| number(t.raw)));
        if mitigated {
            row.extend(p.terms.iter().map(|t| t.mitigated.map(number).unwrap_or_default()));
        }
        for q in &calibrated {
            let e = p.calibration.as_ref().and_then(|c| c.qubits.get(q));
            row.push(e.map(|e| number(e.p0)).unwrap_or_default());
            row.push(e.map(|e| number(e.p1)).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    finish_csv(w)
}

pub fn minimum_csv(result: &VqeResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta", "energy", "iterations", "evaluations", "converged"])?;
    let theta = result.theta.iter().map(|v| number(*v)).collect::<Vec<_>>().join(";");
    w.write_record([
        theta,
        number(result.energy),
        result.iterations.to_string(),
        result.evaluations.to_string(),
        result.converged.to_string(),
    ])?;
    finish_csv(w)
}

fn serve(a: &ServeArgs) -> Result<()> {
    let config = ServerConfig {
        latency: Duration::from_millis(a.latency_ms),
        backend: a.backend,
        noise: load_optional_noise(a.noise.as_deref())?,
    };
    let addr = SocketAddr::new(a.host, a.port);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Server(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Server(format!("binding {addr}: {e}")))?;
        tracing::info!(%addr, backend = %config.backend, latency_ms = a.latency_ms, "server listening");
        let server = Server::new(config);
        server
            .serve(listener, async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
