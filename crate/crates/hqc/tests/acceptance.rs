//! End-to-end acceptance run. Each criterion prints one PASS or FAIL line
//! with its wall-clock time; the process exits non-zero if any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::oracle::{fidelity, instruction_unitary, kernel_unitary, pauli_matrix, vector, CMat};
use common::{deuteron_ansatz, random_kernel, random_state, redundant_kernel, rng, DEUTERON_QK};
use hqc::server::JobView;
use hqc::{RemoteAccelerator, ServerConfig, ServerHandle};
use hqc_core::accel::{bitstring, sample, Accelerator, AcceleratorBuffer, ExecutionRequest, LocalSimulator, NoiseModel};
use hqc_core::ir::{Instruction, Kernel};
use hqc_core::mitigation::{correct_counts, invert_distribution, CalibrationData, ReadoutEstimate};
use hqc_core::passes::{cancel_inverse_pairs, lower_to_native, merge_rotations, route_swaps, Layout, NativeGateSet, Topology};
use hqc_core::vqe::{energy_at, linspace, minimize, sweep, EnergyOptions, PauliHamiltonian};
use hqc_core::{parse, resolve_calls};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

fn closed_form(theta: f64) -> f64 {
    5.906709 - 6.343291 * theta.cos() - 4.286608 * theta.sin()
}

fn theta_star() -> f64 {
    4.286608f64.atan2(6.343291)
}

fn exact_energy(theta: f64) -> f64 {
    let h = PauliHamiltonian::deuteron_n2();
    energy_at(&[theta], &h, &deuteron_ansatz(), &LocalSimulator::new(), &EnergyOptions::default()).unwrap().energy_raw
}

fn source_fidelity() {
    let program = parse(DEUTERON_QK).unwrap();
    let sizes: Vec<(&str, usize)> =
        program.names().map(|n| (n, resolve_calls(&program, n).unwrap().body.len())).collect();
    assert_eq!(sizes, [("ansatz", 3), ("z0", 4), ("z1", 4), ("x0x1", 7), ("y0y1", 7)]);
    let text = program.to_assembly();
    let again = parse(&text).unwrap();
    assert_eq!(again, program);
    assert_eq!(again.to_assembly(), text);
}

fn deuteron_ground_energy() {
    let h = PauliHamiltonian::deuteron_n2();
    let dense = h.terms().iter().fold(CMat::zeros(4, 4), |acc, t| {
        acc + pauli_matrix(&t.operators, 2) * Complex64::new(t.coefficient, 0.0)
    });
    let lambda = dense.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let result = minimize(&h, &deuteron_ansatz(), &LocalSimulator::new(), &EnergyOptions::default(), &[0.0]).unwrap();
    assert!(result.converged);
    assert!((result.energy - lambda).abs() < 1e-6, "E* = {} vs λ = {lambda}", result.energy);
}

fn sweep_curve() {
    let grid = linspace(0.0, PI, 50);
    let h = PauliHamiltonian::deuteron_n2();
    let points = sweep(&grid, &h, &deuteron_ansatz(), &LocalSimulator::new(), &EnergyOptions::default()).unwrap();
    assert_eq!(points.len(), 50);
    for p in &points {
        let want = closed_form(p.theta[0]);
        assert!((p.energy_raw - want).abs() < 1e-9, "θ={}: {} vs {want}", p.theta[0], p.energy_raw);
    }
}

fn sampling_convergence() {
    let h = PauliHamiltonian::deuteron_n2();
    let exact = exact_energy(theta_star());
    for (shots, seed, band) in [(10_000u64, 101u64, 0.2), (100_000, 102, 0.07)] {
        let opts = EnergyOptions { shots, seed, ..Default::default() };
        let e = energy_at(&[theta_star()], &h, &deuteron_ansatz(), &LocalSimulator::new(), &opts).unwrap().energy_raw;
        assert!((e - exact).abs() < band, "{shots} shots: {e} vs {exact}");
    }
}

/// Observed-given-true readout map over `qubits`, bit k of an index belonging to `qubits[k]`.
fn confusion(qubits: &[usize], cal: &CalibrationData) -> DMatrix<f64> {
    qubits.iter().rev().fold(DMatrix::identity(1, 1), |acc, &q| {
        let e = cal.get(q).unwrap();
        acc.kronecker(&DMatrix::from_row_slice(2, 2, &[1.0 - e.p0, e.p1, e.p0, 1.0 - e.p1]))
    })
}

fn mitigation() {
    let mut r = rng(50);
    for _ in 0..20 {
        let qubits = [0usize, 1];
        let cal = CalibrationData::new(
            qubits.iter().map(|&q| (q, ReadoutEstimate { p0: r.random_range(0.0..0.2), p1: r.random_range(0.0..0.2) })).collect(),
            0,
        );
        let raw: Vec<f64> = (0..4).map(|_| r.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let truth: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let observed = confusion(&qubits, &cal) * DVector::from_column_slice(&truth);
        let recovered = invert_distribution(observed.as_slice(), &qubits, &cal).unwrap();
        for (a, b) in recovered.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let mut buffer = AcceleratorBuffer { qubit_count: 2, shots: 1_000_000, measured_qubits: qubits.to_vec(), ..Default::default() };
        buffer.metadata.corrected_distribution =
            Some(observed.iter().enumerate().map(|(i, &p)| (bitstring(i, 2), p)).collect());
        let dist = correct_counts(&buffer, &cal).unwrap().distribution();
        for (i, p) in truth.iter().enumerate() {
            assert!((dist[&bitstring(i, 2)] - p).abs() < 1e-10);
        }
    }

    let h = PauliHamiltonian::deuteron_n2();
    let noisy = LocalSimulator::with_noise(NoiseModel::uniform(2, 0.05, 0.05).unwrap());
    let opts = EnergyOptions { shots: 100_000, seed: 51, mitigate: true, ..Default::default() };
    let points = sweep(&linspace(0.0, PI, 20), &h, &deuteron_ansatz(), &noisy, &opts).unwrap();
    let n = points.len() as f64;
    let raw = points.iter().map(|p| (p.energy_raw - closed_form(p.theta[0])).abs()).sum::<f64>() / n;
    let mitigated = points.iter().map(|p| (p.energy_mitigated.unwrap() - closed_form(p.theta[0])).abs()).sum::<f64>() / n;
    println!("      mean |E_raw - E_exact| = {raw:.4}, mean |E_mitigated - E_exact| = {mitigated:.4}");
    assert!(mitigated <= raw / 3.0, "mitigated {mitigated} vs raw {raw}");
}

fn permute(state: &DVector<Complex64>, layout: &Layout) -> DVector<Complex64> {
    let mut out = DVector::zeros(state.len());
    for (i, amp) in state.iter().enumerate() {
        let j = layout.as_slice().iter().enumerate().fold(0usize, |acc, (l, &p)| acc | ((i >> l) & 1) << p);
        out[j] = *amp;
    }
    out
}

fn routing_soundness() {
    let line = Topology::line(4).unwrap();
    let mut r = rng(60);
    for case in 0..200u64 {
        let n = r.random_range(1..=4usize);
        let gates = r.random_range(1..=20usize);
        let k = random_kernel(n, gates, &mut r);
        let (routed, layout) = route_swaps(&k, &line).unwrap();
        for inst in &routed.body {
            if let [a, b] = inst.qubits() {
                assert!(line.is_edge(*a, *b), "case {case}: {inst}");
            }
        }
        let (u, v) = (kernel_unitary(&k, 4), kernel_unitary(&routed, 4));
        for _ in 0..4 {
            let psi = vector(random_state(4, &mut r).amplitudes());
            let f = fidelity(&permute(&(&u * &psi), &layout), &(&v * &psi));
            assert!(f >= 1.0 - 1e-10, "case {case}: {f}");
        }
    }
}

fn min_fidelity(a: &CMat, b: &CMat, n: usize, r: &mut rand_chacha::ChaCha8Rng) -> f64 {
    (0..8)
        .map(|_| {
            let psi = vector(random_state(n, r).amplitudes());
            fidelity(&(a * &psi), &(b * &psi))
        })
        .fold(f64::INFINITY, f64::min)
}

fn lowering_soundness() {
    let native = NativeGateSet::default();
    let mut r = rng(70);
    let mut rules =
        vec![Instruction::x(0), Instruction::y(1), Instruction::z(0), Instruction::h(1), Instruction::cnot(0, 1), Instruction::cnot(1, 0), Instruction::swap(0, 1)];
    for _ in 0..5 {
        let theta = r.random_range(-2.0 * PI..2.0 * PI);
        rules.extend([Instruction::rx(theta, 0), Instruction::ry(theta, 1), Instruction::rz(theta, 0)]);
    }
    for inst in rules {
        let lowered = lower_to_native(&Kernel::new("k", vec![], vec![inst.clone()]), &native).unwrap();
        assert!(lowered.body.iter().all(|i| native.contains(i.kind())), "{inst}");
        let f = min_fidelity(&instruction_unitary(&inst, 2), &kernel_unitary(&lowered, 2), 2, &mut r);
        assert!(f >= 1.0 - 1e-12, "{inst}: {f}");
    }
    for case in 0..100 {
        let n = 1 + case % 4;
        let k = redundant_kernel(n, 25, &mut r);
        let u = kernel_unitary(&k, n);
        for pass in [cancel_inverse_pairs as fn(&Kernel) -> hqc_core::Result<Kernel>, merge_rotations] {
            let out = pass(&k).unwrap();
            assert!(out.body.len() <= k.body.len(), "case {case} grew");
            let f = min_fidelity(&u, &kernel_unitary(&out, n), n, &mut r);
            assert!(f >= 1.0 - 1e-10, "case {case}: {f}");
        }
    }
}

fn deuteron_kernel(name: &str, theta: f64) -> Kernel {
    resolve_calls(&parse(DEUTERON_QK).unwrap(), name).unwrap().bind_values(&[theta]).unwrap()
}

fn access_model() {
    let plain = ServerHandle::spawn("127.0.0.1:0".parse().unwrap(), ServerConfig::default()).unwrap();
    let noise = NoiseModel::uniform(2, 0.03, 0.06).unwrap();
    for (remote, noise) in [
        (RemoteAccelerator::new(plain.url()), None),
        (RemoteAccelerator::new(plain.url()).with_noise(noise.clone()), Some(&noise)),
    ] {
        for (seed, name) in ["z0", "z1", "x0x1", "y0y1"].into_iter().enumerate() {
            let k = deuteron_kernel(name, 0.7);
            let got = remote.execute(&k, 3000, seed as u64).unwrap();
            assert_eq!(got.counts, sample(&k, 3000, seed as u64, noise).unwrap().counts, "{name}");
        }
    }

    let slow = ServerHandle::spawn(
        "127.0.0.1:0".parse().unwrap(),
        ServerConfig { latency: Duration::from_millis(100), ..Default::default() },
    )
    .unwrap();
    let remote = RemoteAccelerator::new(slow.url());
    let mut both = deuteron_ansatz().bind_values(&[0.7]).unwrap();
    both.name = "zz".into();
    both.body.extend([Instruction::measure(0, 0), Instruction::measure(1, 1)]);
    let mut kernels: Vec<Kernel> = ["z0", "z1", "x0x1", "y0y1"].iter().map(|n| deuteron_kernel(n, 0.7)).collect();
    kernels.push(both);
    let requests: Vec<ExecutionRequest> =
        kernels.into_iter().enumerate().map(|(i, kernel)| ExecutionRequest { kernel, shots: 1000, seed: i as u64 }).collect();

    let t = Instant::now();
    let individual: Vec<_> = requests.iter().map(|r| remote.execute(&r.kernel, r.shots, r.seed).unwrap()).collect();
    let individual_time = t.elapsed();
    let t = Instant::now();
    let session = remote.execute_batch(&requests).unwrap();
    let session_time = t.elapsed();
    println!("      5 individual jobs {individual_time:.2?}, one 5-kernel session {session_time:.2?}");
    assert_eq!(individual, session);
    assert!(session_time < individual_time);

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let ids: Vec<String> = (0..10u64)
        .map(|i| {
            let k = deuteron_kernel("x0x1", 0.1 * i as f64);
            let body = serde_json::json!({
                "program": hqc_core::ir::Program::new(vec![k.clone()]).unwrap().to_assembly(),
                "kernel": k.name,
                "shots": 100,
                "seed": i,
            });
            let mut response = agent.post(format!("{}/jobs", slow.url())).send_json(&body).unwrap();
            let reply: serde_json::Value = response.body_mut().read_json().unwrap();
            reply["id"].as_str().unwrap().to_string()
        })
        .collect();
    let mut finished = Vec::new();
    for id in &ids {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let view: JobView = agent.get(format!("{}/jobs/{id}", slow.url())).call().unwrap().body_mut().read_json().unwrap();
            if view.status.is_terminal() {
                finished.push(view.finished_ms.unwrap());
                break;
            }
            assert!(Instant::now() < deadline, "job {id} did not finish");
            std::thread::sleep(Duration::from_millis(5));
        }
    }
    assert!(finished.windows(2).all(|w| w[0] < w[1]), "completion order {finished:?}");
}

fn serialization() {
    let mut runner = TestRunner::new(Config { cases: 100, failure_persistence: None, ..Config::default() });
    let seen = std::cell::Cell::new(0);
    let outcome = runner.run(&common::program_strategy(), |program| {
        seen.set(seen.get() + 1);
        let json = hqc::serial::to_json(&program);
        assert_eq!(hqc::serial::from_json(&json).unwrap(), program);
        assert_eq!(parse(&program.to_assembly()).unwrap(), program);
        Ok(())
    });
    if let Err(e) = outcome {
        panic!("{e}");
    }
    assert!(seen.get() >= 100);
}

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn(),
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "source fidelity", limit: secs(1), run: source_fidelity },
        Criterion { name: "deuteron ground energy", limit: secs(5), run: deuteron_ground_energy },
        Criterion { name: "sweep curve", limit: None, run: sweep_curve },
        Criterion { name: "sampling convergence", limit: None, run: sampling_convergence },
        Criterion { name: "readout mitigation", limit: secs(120), run: mitigation },
        Criterion { name: "routing soundness", limit: secs(60), run: routing_soundness },
        Criterion { name: "lowering and optimizer soundness", limit: None, run: lowering_soundness },
        Criterion { name: "access model", limit: secs(30), run: access_model },
        Criterion { name: "serialization round trips", limit: None, run: serialization },
    ];

    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run));
        let elapsed = started.elapsed();
        let verdict = match (&outcome, c.limit) {
            (Err(_), _) => Err("assertion failed".to_string()),
            (Ok(()), Some(limit)) if elapsed >= limit => Err(format!("exceeded {limit:?}")),
            _ => Ok(()),
        };
        match verdict {
            Ok(()) => println!("PASS [{}] {} ({elapsed:.2?})", i + 1, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {} ({elapsed:.2?}): {why}", i + 1, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
