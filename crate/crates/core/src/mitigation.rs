//! Readout-error mitigation.
//!
//! A pre-processor pairs the main kernel(s) with calibration kernels that
//! prepare `|0⟩` and `|1⟩` on every measured qubit. Executing them estimates
//! each qubit's flip probabilities; the post-processor then inverts the
//! tensor-product confusion matrix on the measured distribution.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::accel::{apportion, bitstring, Accelerator, AcceleratorBuffer, ExecutionRequest};
use crate::error::{Error, Result};
use crate::ir::{Instruction, Kernel, Program, Qubit};
use crate::passes::PreProcessor;

/// Estimated flip probabilities of one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutEstimate {
    /// Fraction of 1 readouts after preparing 0.
    pub p0: f64,
    /// Fraction of 0 readouts after preparing 1.
    pub p1: f64,
}

impl ReadoutEstimate {
    pub fn is_invertible(&self) -> bool {
        self.p0 + self.p1 < 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationData {
    pub qubits: BTreeMap<Qubit, ReadoutEstimate>,
    pub shots: u64,
}

impl CalibrationData {
    pub fn new(qubits: BTreeMap<Qubit, ReadoutEstimate>, shots: u64) -> Self {
        Self { qubits, shots }
    }

    pub fn get(&self, q: Qubit) -> Result<ReadoutEstimate> {
        self.qubits.get(&q).copied().ok_or(Error::MissingCalibration(q))
    }

    fn invertible(&self, q: Qubit) -> Result<ReadoutEstimate> {
        let e = self.get(q)?;
        if e.is_invertible() {
            Ok(e)
        } else {
            Err(Error::NonInvertible(q))
        }
    }
}

pub fn calibration_kernel_name(qubit: Qubit, prepared: u8) -> alloc::string::String {
    format!("cal_{qubit}_{prepared}")
}

/// Two kernels per qubit: `cal_q_0 = [MEASURE q [0]]`, `cal_q_1 = [X q; MEASURE q [0]]`.
pub fn make_calibration_kernels(qubits: &[Qubit]) -> Result<Program> {
    if qubits.is_empty() {
        return Err(Error::InvalidInstruction("calibration needs at least one qubit".into()));
    }
    let mut seen = BTreeSet::new();
    let mut kernels = Vec::with_capacity(2 * qubits.len());
    for &q in qubits {
        if !seen.insert(q) {
            return Err(Error::InvalidInstruction(format!("qubit {q} listed twice for calibration")));
        }
        kernels.push(Kernel::new(calibration_kernel_name(q, 0), Vec::new(), vec![Instruction::measure(q, 0)]));
        kernels.push(Kernel::new(
            calibration_kernel_name(q, 1),
            Vec::new(),
            vec![Instruction::x(q), Instruction::measure(q, 0)],
        ));
    }
    Program::new(kernels)
}

/// Flip estimates from executed calibration kernels, keyed by kernel name.
pub fn estimate_confusion(qubits: &[Qubit], buffers: &BTreeMap<alloc::string::String, AcceleratorBuffer>) -> Result<CalibrationData> {
    let mut out = BTreeMap::new();
    let mut shots = 0;
    for &q in qubits {
        let zero = buffers.get(&calibration_kernel_name(q, 0)).ok_or(Error::MissingCalibration(q))?;
        let one = buffers.get(&calibration_kernel_name(q, 1)).ok_or(Error::MissingCalibration(q))?;
        if zero.shots == 0 || one.shots == 0 {
            return Err(Error::ZeroShots);
        }
        let p0 = zero.count("1") as f64 / zero.shots as f64;
        let p1 = one.count("0") as f64 / one.shots as f64;
        out.insert(q, ReadoutEstimate { p0, p1 });
        shots = shots.max(zero.shots.max(one.shots));
    }
    Ok(CalibrationData::new(out, shots))
}

/// Applies the inverse of `[[1-p0, p1], [p0, 1-p1]]` along bit `k` of
/// each index, in place.
fn invert_axis(dist: &mut [f64], k: usize, e: ReadoutEstimate) {
    let det = 1.0 - e.p0 - e.p1;
    let bit = 1usize << k;
    for i in 0..dist.len() {
        if i & bit == 0 {
            let (m0, m1) = (dist[i], dist[i | bit]);
            dist[i] = ((1.0 - e.p1) * m0 - e.p1 * m1) / det;
            dist[i | bit] = (-e.p0 * m0 + (1.0 - e.p0) * m1) / det;
        }
    }
}

/// Inverts the confusion matrix on a dense distribution whose index bit `k`
/// was read from `qubits[k]`. The result may contain negative entries.
pub fn invert_distribution(dist: &[f64], qubits: &[Qubit], cal: &CalibrationData) -> Result<Vec<f64>> {
    if dist.len() != 1 << qubits.len() {
        return Err(Error::DimensionMismatch(dist.len(), 1 << qubits.len()));
    }
    let mut out = dist.to_vec();
    for (k, &q) in qubits.iter().enumerate() {
        invert_axis(&mut out, k, cal.invertible(q)?);
    }
    Ok(out)
}

/// Clips negative quasi-probabilities to zero and renormalizes.
pub fn clip_and_normalize(quasi: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = quasi.iter().map(|&p| p.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    if sum > 0.0 {
        clipped.into_iter().map(|p| p / sum).collect()
    } else {
        clipped
    }
}

/// Mitigated copy of `buffer`: counts rescaled from the corrected
/// distribution, with the raw quasi-distribution, the corrected real-valued
/// distribution and the calibration recorded in metadata.
pub fn correct_counts(buffer: &AcceleratorBuffer, cal: &CalibrationData) -> Result<AcceleratorBuffer> {
    let width = buffer.measured_qubits.len();
    let mut dense = vec![0.0; 1 << width];
    for (bits, p) in buffer.distribution() {
        let idx = usize::from_str_radix(&bits, 2)
            .ok()
            .filter(|_| bits.len() == width)
            .ok_or_else(|| Error::InvalidInstruction(format!("bitstring `{bits}` does not match {width} measured qubit(s)")))?;
        dense[idx] += p;
    }
    let quasi = invert_distribution(&dense, &buffer.measured_qubits, cal)?;
    let corrected = clip_and_normalize(&quasi);
    let tallies = apportion(&corrected, buffer.shots);

    let named = |v: &[f64]| -> BTreeMap<_, _> {
        v.iter().enumerate().map(|(i, &p)| (bitstring(i, width), p)).collect()
    };
    let mut out = buffer.clone();
    out.counts = tallies
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (bitstring(i, width), c))
        .collect();
    out.metadata.quasi_distribution = Some(named(&quasi));
    out.metadata.corrected_distribution = Some(named(&corrected));
    out.metadata.calibration = Some(cal.clone());
    Ok(out)
}

/// Shift-and-scale correction of a single-qubit `⟨Z⟩`:
/// `(z − (p1 − p0)) / (1 − p0 − p1)`, clamped to `[-1, 1]`.
pub fn correct_expectation(z: f64, qubit: Qubit, cal: &CalibrationData) -> Result<f64> {
    let e = cal.invertible(qubit)?;
    Ok(((z - (e.p1 - e.p0)) / (1.0 - e.p0 - e.p1)).clamp(-1.0, 1.0))
}

/// Captured by the readout pre-processor; runs calibration and corrects buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutCorrection {
    qubits: Vec<Qubit>,
    calibration_kernels: Program,
    shots: Option<u64>,
}

impl ReadoutCorrection {
    /// Correction covering every qubit measured by any of `kernels`.
    pub fn for_kernels<'a>(kernels: impl IntoIterator<Item = &'a Kernel>, shots: Option<u64>) -> Result<Self> {
        let qubits: BTreeSet<Qubit> =
            kernels.into_iter().flat_map(|k| k.measurements().into_iter().map(|(q, _)| q)).collect();
        let qubits: Vec<Qubit> = qubits.into_iter().collect();
        let calibration_kernels = make_calibration_kernels(&qubits)?;
        Ok(Self { qubits, calibration_kernels, shots })
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    /// The kernels prepended to the executed program.
    pub fn calibration_kernels(&self) -> &Program {
        &self.calibration_kernels
    }

    /// Calibration shots, defaulting to the main kernel's.
    pub fn shots(&self, main_shots: u64) -> u64 {
        self.shots.unwrap_or(main_shots)
    }

    pub fn requests(&self, main_shots: u64, seed: u64) -> Vec<ExecutionRequest> {
        let shots = self.shots(main_shots);
        self.calibration_kernels
            .kernels()
            .iter()
            .enumerate()
            .map(|(i, k)| ExecutionRequest { kernel: k.clone(), shots, seed: crate::vqe::derive_seed(seed, i as u64) })
            .collect()
    }

    /// Estimates calibration data from buffers returned for [`Self::requests`], in order.
    pub fn estimate(&self, buffers: Vec<AcceleratorBuffer>) -> Result<CalibrationData> {
        let named = self
            .calibration_kernels
            .names()
            .map(alloc::string::String::from)
            .zip(buffers)
            .collect();
        estimate_confusion(&self.qubits, &named)
    }

    /// Executes the calibration kernels and estimates flip probabilities.
    pub fn calibrate(&self, accelerator: &dyn Accelerator, main_shots: u64, seed: u64) -> Result<CalibrationData> {
        let buffers = accelerator.execute_batch(&self.requests(main_shots, seed))?;
        self.estimate(buffers)
    }

    pub fn apply(&self, buffer: &AcceleratorBuffer, cal: &CalibrationData) -> Result<AcceleratorBuffer> {
        correct_counts(buffer, cal)
    }
}

/// Post-processing steps emitted by pre-processors.
#[derive(Debug, Clone, PartialEq)]
pub enum PostProcessor {
    Readout(ReadoutCorrection),
}

impl PostProcessor {
    /// Runs any execution the step needs (calibration) and corrects `buffer`.
    pub fn run(&self, accelerator: &dyn Accelerator, buffer: &AcceleratorBuffer, seed: u64) -> Result<AcceleratorBuffer> {
        match self {
            PostProcessor::Readout(rc) => {
                let cal = rc.calibrate(accelerator, buffer.shots, seed)?;
                rc.apply(buffer, &cal)
            }
        }
    }
}

/// Leaves the kernel untouched and emits a [`ReadoutCorrection`] for its measured qubits.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReadoutMitigation {
    pub calibration_shots: Option<u64>,
}

impl PreProcessor for ReadoutMitigation {
    fn name(&self) -> &str {
        "readout-mitigation"
    }

    fn preprocess(&self, kernel: Kernel) -> Result<(Kernel, Option<PostProcessor>)> {
        let correction = ReadoutCorrection::for_kernels([&kernel], self.calibration_shots)?;
        Ok((kernel, Some(PostProcessor::Readout(correction))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::{sample, LocalSimulator, NoiseModel};
    use approx::assert_abs_diff_eq;

    fn cal(entries: &[(Qubit, f64, f64)]) -> CalibrationData {
        let qubits = entries.iter().map(|&(q, p0, p1)| (q, ReadoutEstimate { p0, p1 })).collect();
        CalibrationData::new(qubits, 1000)
    }

    #[test]
    fn calibration_kernels_shape() {
        let p = make_calibration_kernels(&[0]).unwrap();
        assert_eq!(p.len(), 2);
        let one = p.get("cal_0_1").unwrap();
        assert_eq!(one.body, vec![Instruction::x(0), Instruction::measure(0, 0)]);
        assert_eq!(p.get("cal_0_0").unwrap().body, vec![Instruction::measure(0, 0)]);
        assert_eq!(make_calibration_kernels(&[0, 1]).unwrap().len(), 4);
        assert!(make_calibration_kernels(&[]).is_err());
        assert!(make_calibration_kernels(&[1, 1]).is_err());
    }

    #[test]
    fn noiseless_estimates_are_zero() {
        let rc = ReadoutCorrection::for_kernels(
            [&Kernel::new("m", Vec::new(), vec![Instruction::measure(0, 0), Instruction::measure(1, 1)])],
            None,
        )
        .unwrap();
        let c = rc.calibrate(&LocalSimulator::new(), 500, 3).unwrap();
        assert_eq!(c.get(0).unwrap(), ReadoutEstimate { p0: 0.0, p1: 0.0 });
        assert_eq!(c.get(1).unwrap(), ReadoutEstimate { p0: 0.0, p1: 0.0 });
    }

    #[test]
    fn noisy_estimates_within_band() {
        let program = make_calibration_kernels(&[0]).unwrap();
        let noise = NoiseModel::new(vec![crate::accel::ReadoutError { p0: 0.08, p1: 0.02 }]).unwrap();
        let shots = 100_000;
        let buffers = program
            .kernels()
            .iter()
            .enumerate()
            .map(|(i, k)| (k.name.clone(), sample(k, shots, 100 + i as u64, Some(&noise)).unwrap()))
            .collect();
        let c = estimate_confusion(&[0], &buffers).unwrap();
        let e = c.get(0).unwrap();
        let band = |p: f64| 3.0 * (p * (1.0 - p) / shots as f64).sqrt();
        assert!((e.p0 - 0.08).abs() < band(0.08), "{e:?}");
        assert!((e.p1 - 0.02).abs() < band(0.02), "{e:?}");
        assert!(matches!(estimate_confusion(&[1], &buffers), Err(Error::MissingCalibration(1))));
    }

    #[test]
    fn identity_calibration_leaves_counts() {
        let mut b = AcceleratorBuffer { qubit_count: 1, shots: 10, measured_qubits: vec![0], ..Default::default() };
        b.counts.insert("0".into(), 7);
        b.counts.insert("1".into(), 3);
        let out = correct_counts(&b, &cal(&[(0, 0.0, 0.0)])).unwrap();
        assert_eq!(out.counts, b.counts);
    }

    #[test]
    fn single_qubit_round_trip() {
        // forward: P(0) = 0.9·0.9 + 0.1·0.1 = 0.82
        let measured = [0.82, 0.18];
        let back = invert_distribution(&measured, &[0], &cal(&[(0, 0.1, 0.1)])).unwrap();
        assert_abs_diff_eq!(back[0], 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn non_invertible_rejected() {
        let c = cal(&[(0, 0.5, 0.5)]);
        assert_eq!(invert_distribution(&[0.5, 0.5], &[0], &c).unwrap_err(), Error::NonInvertible(0));
        assert_eq!(correct_expectation(0.1, 0, &c).unwrap_err(), Error::NonInvertible(0));
    }

    #[test]
    fn shift_and_scale() {
        assert_abs_diff_eq!(correct_expectation(0.8, 0, &cal(&[(0, 0.1, 0.1)])).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(correct_expectation(0.37, 0, &cal(&[(0, 0.0, 0.0)])).unwrap(), 0.37);
        // forward map of ⟨Z⟩ = 0.6 with p0 = 0.08, p1 = 0.02 gives 0.48
        assert_abs_diff_eq!(correct_expectation(0.48, 0, &cal(&[(0, 0.08, 0.02)])).unwrap(), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn negative_quasi_probabilities_are_clipped() {
        let mut b = AcceleratorBuffer { qubit_count: 1, shots: 100, measured_qubits: vec![0], ..Default::default() };
        b.counts.insert("0".into(), 100);
        let out = correct_counts(&b, &cal(&[(0, 0.1, 0.1)])).unwrap();
        let quasi = out.metadata.quasi_distribution.as_ref().unwrap();
        assert!(quasi["1"] < 0.0);
        assert_eq!(out.counts["0"], 100);
        assert_eq!(out.metadata.corrected_distribution.as_ref().unwrap()["1"], 0.0);
    }

    #[test]
    fn preprocessor_keeps_kernel_and_emits_one_step() {
        let k = Kernel::new("k", Vec::new(), vec![Instruction::h(1), Instruction::measure(1, 0)]);
        let (out, post) = ReadoutMitigation::default().preprocess(k.clone()).unwrap();
        assert_eq!(out, k);
        let Some(PostProcessor::Readout(rc)) = post else { panic!() };
        assert_eq!(rc.qubits(), &[1]);
        assert_eq!(rc.calibration_kernels().len(), 2);
    }
}
