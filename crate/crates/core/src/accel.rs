//! Accelerator contract and the local state-vector implementation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ir::{Axis, Gate1, Gate2, Instruction, Kernel, Qubit};
use crate::mitigation::CalibrationData;
use crate::pauli::{Pauli, PauliString};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unitary of a single-qubit gate or rotation. Symbolic angles are rejected.
pub fn single_qubit_matrix(inst: &Instruction) -> Result<Option<Matrix2>> {
    let m = match inst {
        Instruction::Gate1 { gate, .. } => match gate {
            Gate1::X => [[ZERO, ONE], [ONE, ZERO]],
            Gate1::Y => [[ZERO, -I], [I, ZERO]],
            Gate1::Z => [[ONE, ZERO], [ZERO, -ONE]],
            Gate1::H => {
                let s = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
        },
        Instruction::Rotation { axis, angle, .. } => {
            let theta = angle.value().ok_or_else(|| {
                Error::SymbolicParameter(angle.symbol().unwrap_or_default().into())
            })?;
            rotation_matrix(*axis, theta)
        }
        _ => return Ok(None),
    };
    Ok(Some(m))
}

/// `exp(-i θ P / 2)` for `P` the given axis.
pub fn rotation_matrix(axis: Axis, theta: f64) -> Matrix2 {
    let c = Complex64::new(libm::cos(theta / 2.0), 0.0);
    let s = libm::sin(theta / 2.0);
    match axis {
        Axis::X => [[c, Complex64::new(0.0, -s)], [Complex64::new(0.0, -s), c]],
        Axis::Y => [[c, Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), c]],
        Axis::Z => [
            [Complex64::new(c.re, -s), ZERO],
            [ZERO, Complex64::new(c.re, s)],
        ],
    }
}

/// Pure state of `n` qubits; qubit 0 is the least-significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(qubits: usize) -> Result<Self> {
        if qubits > MAX_QUBITS {
            return Err(Error::WidthCap { width: qubits, cap: MAX_QUBITS });
        }
        let mut amplitudes = vec![ZERO; 1 << qubits];
        amplitudes[0] = ONE;
        Ok(Self { amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = amplitudes.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::DimensionMismatch(n, n.next_power_of_two()));
        }
        if n.trailing_zeros() as usize > MAX_QUBITS {
            return Err(Error::WidthCap { width: n.trailing_zeros() as usize, cap: MAX_QUBITS });
        }
        Ok(Self { amplitudes })
    }

    pub fn qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch(self.amplitudes.len(), other.amplitudes.len()));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    fn check_qubit(&self, q: Qubit) -> Result<()> {
        if q >= self.qubits() {
            return Err(Error::DimensionMismatch(q + 1, self.qubits()));
        }
        Ok(())
    }

    pub fn apply_matrix(&mut self, q: Qubit, m: &Matrix2) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & bit == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | bit];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: Qubit, target: Qubit) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        let (c, t) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & c != 0 && i & t == 0 {
                self.amplitudes.swap(i, i | t);
            }
        }
        Ok(())
    }

    pub fn apply_swap(&mut self, a: Qubit, b: Qubit) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        let (ba, bb) = (1usize << a, 1usize << b);
        for i in 0..self.amplitudes.len() {
            if i & ba != 0 && i & bb == 0 {
                self.amplitudes.swap(i, (i & !ba) | bb);
            }
        }
        Ok(())
    }

    /// Applies one instruction. MEASURE is a no-op in pure-state mode.
    pub fn apply(&mut self, inst: &Instruction) -> Result<()> {
        match inst {
            Instruction::Gate2 { gate: Gate2::Cnot, qubits: [c, t] } => self.apply_cnot(*c, *t),
            Instruction::Gate2 { gate: Gate2::Swap, qubits: [a, b] } => self.apply_swap(*a, *b),
            Instruction::Measure { qubit, .. } => self.check_qubit(*qubit),
            Instruction::Call { callee, .. } => Err(Error::UnresolvedCall(callee.clone())),
            single => {
                let m = single_qubit_matrix(single)?.expect("single-qubit instruction");
                self.apply_matrix(single.qubits()[0], &m)
            }
        }
    }

    pub fn apply_kernel(&mut self, kernel: &Kernel) -> Result<()> {
        kernel.body.iter().try_for_each(|inst| self.apply(inst))
    }

    /// `P|ψ⟩` for a Pauli string.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        if p.width() > self.qubits() {
            return Err(Error::InvalidPauli(format!("{p} on {} qubit(s)", self.qubits())));
        }
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut ys = 0u32;
        for (&q, &op) in p.ops() {
            match op {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    zmask |= 1 << q;
                    ys += 1;
                }
                Pauli::Z => zmask |= 1 << q,
            }
        }
        // Y = i·X·Z, so P = i^ys · X^flip · Z^zmask.
        let global = match ys % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
        let mut out = vec![ZERO; self.amplitudes.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let sign = if (i & zmask).count_ones() % 2 == 1 { -ONE } else { ONE };
            out[i ^ flip] = global * sign * a;
        }
        Ok(StateVector { amplitudes: out })
    }

    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        Ok(self.inner(&self.apply_pauli(p)?)?.re)
    }
}

/// Simulates a call-free, bound kernel from `|0…0⟩` over its own width.
pub fn simulate(kernel: &Kernel) -> Result<StateVector> {
    simulate_width(kernel, kernel.width())
}

/// Like [`simulate`] but on a register of at least `width` qubits.
pub fn simulate_width(kernel: &Kernel, width: usize) -> Result<StateVector> {
    let mut state = StateVector::zero(width.max(kernel.width()))?;
    state.apply_kernel(kernel)?;
    Ok(state)
}

/// `⟨ψ|P|ψ⟩` for `ψ = simulate(kernel)`. Measurements are ignored.
pub fn exact_expectation(kernel: &Kernel, observable: &PauliString) -> Result<f64> {
    let state = simulate_width(kernel, observable.width())?;
    state.expectation(observable)
}

/// `|⟨a|b⟩|²`.
pub fn state_fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Per-qubit readout flip probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutError {
    /// P(read 1 | state 0).
    pub p0: f64,
    /// P(read 0 | state 1).
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseModel {
    readout: Vec<ReadoutError>,
}

impl NoiseModel {
    pub fn new(readout: Vec<ReadoutError>) -> Result<Self> {
        for (q, r) in readout.iter().enumerate() {
            let ok = r.p0.is_finite() && r.p1.is_finite() && r.p0 >= 0.0 && r.p1 >= 0.0 && r.p0 + r.p1 < 1.0;
            if !ok {
                return Err(Error::InvalidNoise(format!("qubit {q}: p0={} p1={}", r.p0, r.p1)));
            }
        }
        Ok(Self { readout })
    }

    pub fn uniform(qubits: usize, p0: f64, p1: f64) -> Result<Self> {
        Self::new(vec![ReadoutError { p0, p1 }; qubits])
    }

    pub fn readout(&self) -> &[ReadoutError] {
        &self.readout
    }

    /// Qubits beyond the model read out without error.
    pub fn for_qubit(&self, q: Qubit) -> ReadoutError {
        self.readout.get(q).copied().unwrap_or(ReadoutError { p0: 0.0, p1: 0.0 })
    }
}

/// Extra results attached to a buffer by accelerators and post-processors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BufferMetadata {
    pub expectations: BTreeMap<String, f64>,
    pub calibration: Option<CalibrationData>,
    /// Inverted distribution before clipping (may contain negative entries).
    pub quasi_distribution: Option<BTreeMap<String, f64>>,
    /// Real-valued distribution after mitigation; preferred over counts when present.
    pub corrected_distribution: Option<BTreeMap<String, f64>>,
}

/// Execution result.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AcceleratorBuffer {
    pub qubit_count: usize,
    pub shots: u64,
    /// Bitstring → occurrences. Character `k` from the right is the k-th
    /// measured classical bit in ascending cbit order.
    pub counts: BTreeMap<String, u64>,
    /// Qubit measured into each bitstring position, rightmost first.
    pub measured_qubits: Vec<Qubit>,
    pub metadata: BufferMetadata,
}

impl AcceleratorBuffer {
    /// Probability of each bitstring: the corrected distribution if present,
    /// otherwise counts divided by shots.
    pub fn distribution(&self) -> BTreeMap<String, f64> {
        if let Some(d) = &self.metadata.corrected_distribution {
            return d.clone();
        }
        let shots = self.shots.max(1) as f64;
        self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / shots)).collect()
    }

    pub fn count(&self, bits: &str) -> u64 {
        self.counts.get(bits).copied().unwrap_or(0)
    }
}

/// Renders the low `width` bits of `value`, highest first.
pub fn bitstring(value: usize, width: usize) -> String {
    (0..width).rev().map(|k| if value >> k & 1 == 1 { '1' } else { '0' }).collect()
}

/// One execution in a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRequest {
    pub kernel: Kernel,
    pub shots: u64,
    pub seed: u64,
}

/// A physical or virtual QPU.
///
/// Implementations must be deterministic: the same `(kernel, shots, seed)`
/// yields the same buffer.
pub trait Accelerator: Send + Sync {
    fn name(&self) -> &str;

    /// Whether [`Accelerator::expectation`] returns exact values.
    fn supports_exact(&self) -> bool {
        false
    }

    fn execute(&self, kernel: &Kernel, shots: u64, seed: u64) -> Result<AcceleratorBuffer>;

    /// Runs several kernels as one unit of work. Remote accelerators override
    /// this to queue the batch once.
    fn execute_batch(&self, requests: &[ExecutionRequest]) -> Result<Vec<AcceleratorBuffer>> {
        requests.iter().map(|r| self.execute(&r.kernel, r.shots, r.seed)).collect()
    }

    fn expectation(&self, kernel: &Kernel, observable: &PauliString) -> Result<f64> {
        let _ = (kernel, observable);
        Err(Error::ExactUnsupported(self.name().into()))
    }
}

impl<A: Accelerator + ?Sized> Accelerator for &A {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn supports_exact(&self) -> bool {
        (**self).supports_exact()
    }
    fn execute(&self, kernel: &Kernel, shots: u64, seed: u64) -> Result<AcceleratorBuffer> {
        (**self).execute(kernel, shots, seed)
    }
    fn execute_batch(&self, requests: &[ExecutionRequest]) -> Result<Vec<AcceleratorBuffer>> {
        (**self).execute_batch(requests)
    }
    fn expectation(&self, kernel: &Kernel, observable: &PauliString) -> Result<f64> {
        (**self).expectation(kernel, observable)
    }
}

/// Distribution over measured bits. Index bit `k` is the k-th measurement in
/// ascending cbit order. Rejects gates acting on an already measured qubit.
pub fn measured_distribution(kernel: &Kernel) -> Result<(Vec<f64>, Vec<Qubit>)> {
    let measures = kernel.measurements();
    if measures.is_empty() {
        return Err(Error::NoMeasurement);
    }
    let mut measured = alloc::collections::BTreeSet::new();
    for inst in &kernel.body {
        match inst {
            Instruction::Measure { qubit, .. } => {
                measured.insert(*qubit);
            }
            other => {
                if let Some(q) = other.qubits().iter().find(|q| measured.contains(*q)) {
                    return Err(Error::MidCircuitMeasurement(*q));
                }
            }
        }
    }
    let state = simulate(kernel)?;
    let qubits: Vec<Qubit> = measures.iter().map(|&(q, _)| q).collect();
    let mut dist = vec![0.0; 1 << qubits.len()];
    for (i, p) in state.probabilities().into_iter().enumerate() {
        let outcome = qubits.iter().enumerate().fold(0usize, |acc, (k, &q)| acc | ((i >> q & 1) << k));
        dist[outcome] += p;
    }
    Ok((dist, qubits))
}

/// Draws `shots` outcomes from the measured marginal of `simulate(kernel)`,
/// flipping each read bit independently according to `noise`.
pub fn sample(kernel: &Kernel, shots: u64, seed: u64, noise: Option<&NoiseModel>) -> Result<AcceleratorBuffer> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let (dist, qubits) = measured_distribution(kernel)?;
    let mut cdf = Vec::with_capacity(dist.len());
    let mut acc = 0.0;
    for p in &dist {
        acc += p;
        cdf.push(acc);
    }
    let flips: Vec<ReadoutError> = qubits
        .iter()
        .map(|&q| noise.map_or(ReadoutError { p0: 0.0, p1: 0.0 }, |n| n.for_qubit(q)))
        .collect();
    let noisy = flips.iter().any(|r| r.p0 > 0.0 || r.p1 > 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tallies = vec![0u64; dist.len()];
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * acc;
        let mut outcome = cdf.partition_point(|&c| c <= u).min(dist.len() - 1);
        if noisy {
            for (k, r) in flips.iter().enumerate() {
                let bit = outcome >> k & 1;
                let p = if bit == 0 { r.p0 } else { r.p1 };
                if rng.random::<f64>() < p {
                    outcome ^= 1 << k;
                }
            }
        }
        tallies[outcome] += 1;
    }
    Ok(buffer_from_tallies(kernel, shots, &tallies, qubits))
}

/// Deterministic counts `round(p · shots)` from the exact measured marginal,
/// using largest-remainder rounding so the counts sum to `shots`.
pub fn exact_counts(kernel: &Kernel, shots: u64) -> Result<AcceleratorBuffer> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let (dist, qubits) = measured_distribution(kernel)?;
    let tallies = apportion(&dist, shots);
    Ok(buffer_from_tallies(kernel, shots, &tallies, qubits))
}

/// Largest-remainder apportionment of `total` over non-negative weights.
pub fn apportion(weights: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let scaled: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<u64> = scaled.iter().map(|&s| libm::floor(s) as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - libm::floor(scaled[a]);
        let rb = scaled[b] - libm::floor(scaled[b]);
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned) as usize) {
        out[i] += 1;
    }
    out
}

fn buffer_from_tallies(kernel: &Kernel, shots: u64, tallies: &[u64], qubits: Vec<Qubit>) -> AcceleratorBuffer {
    let counts = tallies
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (bitstring(i, qubits.len()), c))
        .collect();
    AcceleratorBuffer {
        qubit_count: kernel.width(),
        shots,
        counts,
        measured_qubits: qubits,
        metadata: BufferMetadata::default(),
    }
}

/// In-process state-vector accelerator with optional readout noise.
#[derive(Debug, Clone, Default)]
pub struct LocalSimulator {
    noise: Option<NoiseModel>,
}

impl LocalSimulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_noise(noise: NoiseModel) -> Self {
        Self { noise: Some(noise) }
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }
}

impl Accelerator for LocalSimulator {
    fn name(&self) -> &str {
        "local-statevector"
    }

    fn supports_exact(&self) -> bool {
        true
    }

    fn execute(&self, kernel: &Kernel, shots: u64, seed: u64) -> Result<AcceleratorBuffer> {
        sample(kernel, shots, seed, self.noise.as_ref())
    }

    /// Noise-free expectation; readout noise does not apply.
    fn expectation(&self, kernel: &Kernel, observable: &PauliString) -> Result<f64> {
        exact_expectation(kernel, observable)
    }
}
