//! Variational quantum eigensolver over Pauli-sum Hamiltonians.
//!
//! Each non-identity term is measured by appending basis changes (`H` for
//! X, `RX(π/2)` for Y) and measurements to the ansatz; the identity term
//! contributes its coefficient directly. With `shots == 0` on an accelerator
//! that supports it, expectations are computed exactly instead.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

use crate::accel::{Accelerator, AcceleratorBuffer, ExecutionRequest};
use crate::error::{Error, Result};
use crate::ir::{Instruction, Kernel};
use crate::mitigation::{correct_counts, CalibrationData, ReadoutCorrection};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::pauli::{Pauli, PauliString};

#[derive(Debug, Clone, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub operators: PauliString,
}

/// Sum of Pauli terms with distinct operator strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PauliHamiltonian {
    terms: Vec<PauliTerm>,
}

impl PauliHamiltonian {
    /// Combines terms with equal operator strings, keeping first-seen order.
    pub fn new(terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        let mut out: Vec<PauliTerm> = Vec::new();
        for t in terms {
            match out.iter_mut().find(|o| o.operators == t.operators) {
                Some(o) => o.coefficient += t.coefficient,
                None => out.push(t),
            }
        }
        Self { terms: out }
    }

    /// The two-qubit deuteron Hamiltonian in MeV:
    /// `5.906709 I + 0.218291 Z0 − 6.125 Z1 − 2.143304 (X0X1 + Y0Y1)`.
    pub fn deuteron_n2() -> Self {
        let term = |c: f64, ops: &[(usize, Pauli)]| PauliTerm {
            coefficient: c,
            operators: PauliString::from_ops(ops.iter().copied()),
        };
        Self::new([
            term(5.906709, &[]),
            term(0.218291, &[(0, Pauli::Z)]),
            term(-6.125, &[(1, Pauli::Z)]),
            term(-2.143304, &[(0, Pauli::X), (1, Pauli::X)]),
            term(-2.143304, &[(0, Pauli::Y), (1, Pauli::Y)]),
        ])
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of identity coefficients.
    pub fn constant(&self) -> f64 {
        self.terms.iter().filter(|t| t.operators.is_identity()).map(|t| t.coefficient).sum()
    }

    pub fn width(&self) -> usize {
        self.terms.iter().map(|t| t.operators.width()).max().unwrap_or(0)
    }
}

impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{} {}", t.coefficient, t.operators)?;
        }
        Ok(())
    }
}

/// Parses `coeff op…` lines (`5.9 I`, `0.2 Z0`, `-2.1 X0X1`). Blank lines
/// and `#` comments are skipped; repeated operator strings are summed.
pub fn parse_hamiltonian(text: &str) -> Result<PauliHamiltonian> {
    let mut terms = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Hamiltonian { line: i + 1, message };
        let mut parts = line.splitn(2, char::is_whitespace);
        let coeff_text = parts.next().unwrap_or("");
        let coefficient: f64 = coeff_text
            .parse()
            .ok()
            .filter(|c: &f64| c.is_finite())
            .ok_or_else(|| err(format!("bad coefficient `{coeff_text}`")))?;
        let ops_text = parts.next().map(str::trim).unwrap_or("");
        if ops_text.is_empty() {
            return Err(err("missing operator string".into()));
        }
        let operators: PauliString = ops_text.parse().map_err(|_| err(format!("bad operator string `{ops_text}`")))?;
        terms.push(PauliTerm { coefficient, operators });
    }
    Ok(PauliHamiltonian::new(terms))
}

/// Kernel measuring every support qubit into the classical bit of the same
/// index, after the ansatz and basis changes.
fn measurement_kernel(name: String, ansatz: &Kernel, ops: &PauliString) -> Kernel {
    let mut body = ansatz.body.clone();
    for (&q, &p) in ops.ops() {
        match p {
            Pauli::X => body.push(Instruction::h(q)),
            Pauli::Y => body.push(Instruction::rx(FRAC_PI_2, q)),
            Pauli::Z => {}
        }
    }
    body.extend(ops.support().map(|q| Instruction::measure(q, q)));
    Kernel::new(name, ansatz.params.clone(), body)
}

/// One measurement kernel per non-identity term, named after the term in lowercase.
pub fn measurement_kernels(h: &PauliHamiltonian, ansatz: &Kernel) -> Result<BTreeMap<PauliString, Kernel>> {
    if let Some(Instruction::Call { callee, .. }) = ansatz.body.iter().find(|i| matches!(i, Instruction::Call { .. })) {
        return Err(Error::UnresolvedCall(callee.clone()));
    }
    Ok(h.terms
        .iter()
        .filter(|t| !t.operators.is_identity())
        .map(|t| {
            let name = t.operators.to_string().to_lowercase();
            (t.operators.clone(), measurement_kernel(name, ansatz, &t.operators))
        })
        .collect())
}

/// Terms sharing one measurement kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementGroup {
    pub kernel: Kernel,
    pub terms: Vec<PauliString>,
}

/// Measurement plan: one group per term, or greedy qubit-wise-commuting
/// groups when `grouped` is set.
pub fn measurement_groups(h: &PauliHamiltonian, ansatz: &Kernel, grouped: bool) -> Result<Vec<MeasurementGroup>> {
    if !grouped {
        return Ok(measurement_kernels(h, ansatz)?
            .into_iter()
            .map(|(term, kernel)| MeasurementGroup { kernel, terms: alloc::vec![term] })
            .collect());
    }
    let mut groups: Vec<(PauliString, Vec<PauliString>)> = Vec::new();
    for t in h.terms.iter().filter(|t| !t.operators.is_identity()) {
        match groups.iter_mut().find(|(basis, _)| basis.qubitwise_commutes(&t.operators)) {
            Some((basis, members)) => {
                *basis = PauliString::from_ops(basis.ops().iter().chain(t.operators.ops()).map(|(q, p)| (*q, *p)));
                members.push(t.operators.clone());
            }
            None => groups.push((t.operators.clone(), alloc::vec![t.operators.clone()])),
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, (basis, terms))| {
            let kernel = measurement_kernel(format!("group{i}_{}", basis.to_string().to_lowercase()), ansatz, &basis);
            Ok(MeasurementGroup { kernel, terms })
        })
        .collect()
}

/// `Σ (−1)^parity · p(bits)` over the bits read from the term's support qubits.
pub fn term_expectation(buffer: &AcceleratorBuffer, term: &PauliString) -> Result<f64> {
    let positions: Vec<usize> = term
        .support()
        .map(|q| buffer.measured_qubits.iter().position(|&m| m == q))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::SupportMismatch { term: term.to_string() })?;
    let width = buffer.measured_qubits.len();
    let mut total = 0.0;
    for (bits, p) in buffer.distribution() {
        if bits.len() != width {
            return Err(Error::SupportMismatch { term: term.to_string() });
        }
        let bytes = bits.as_bytes();
        let ones = positions.iter().filter(|&&k| bytes[width - 1 - k] == b'1').count();
        total += if ones % 2 == 0 { p } else { -p };
    }
    Ok(total)
}

/// Mixes an index into a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyOptions {
    /// `0` selects exact expectation values.
    pub shots: u64,
    pub seed: u64,
    pub mitigate: bool,
    /// Measure qubit-wise commuting terms together.
    pub grouped: bool,
    /// Defaults to `shots`.
    pub calibration_shots: Option<u64>,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self { shots: 0, seed: 0, mitigate: false, grouped: false, calibration_shots: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermValue {
    pub term: PauliString,
    pub coefficient: f64,
    pub raw: f64,
    pub mitigated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPoint {
    pub theta: Vec<f64>,
    pub energy_raw: f64,
    pub energy_mitigated: Option<f64>,
    /// Non-identity terms in Hamiltonian order.
    pub terms: Vec<TermValue>,
    pub calibration: Option<CalibrationData>,
}

fn check_finite(theta: &[f64], e: f64) -> Result<f64> {
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFiniteEnergy(format!("{theta:?}")))
    }
}

/// `E(θ) = Σ c_t ⟨P_t⟩` for the ansatz bound to `theta`.
pub fn energy_at(
    theta: &[f64],
    h: &PauliHamiltonian,
    ansatz: &Kernel,
    accelerator: &dyn Accelerator,
    opts: &EnergyOptions,
) -> Result<EnergyPoint> {
    let constant = h.constant();
    let non_identity: Vec<&crate::vqe::PauliTerm> = h.terms.iter().filter(|t| !t.operators.is_identity()).collect();

    if opts.shots == 0 {
        if !accelerator.supports_exact() {
            return Err(Error::ExactUnsupported(accelerator.name().into()));
        }
        let bound = ansatz.bind_values(theta)?;
        let mut terms = Vec::with_capacity(non_identity.len());
        for t in non_identity {
            let raw = accelerator.expectation(&bound, &t.operators)?;
            terms.push(TermValue { term: t.operators.clone(), coefficient: t.coefficient, raw, mitigated: None });
        }
        let energy = check_finite(theta, constant + terms.iter().map(|t| t.coefficient * t.raw).sum::<f64>())?;
        return Ok(EnergyPoint {
            theta: theta.to_vec(),
            energy_raw: energy,
            // Exact values carry no readout error to correct.
            energy_mitigated: opts.mitigate.then_some(energy),
            terms,
            calibration: None,
        });
    }

    let groups = measurement_groups(h, ansatz, opts.grouped)?;
    let mut requests = Vec::new();
    let correction = if opts.mitigate && !groups.is_empty() {
        let rc = ReadoutCorrection::for_kernels(groups.iter().map(|g| &g.kernel), opts.calibration_shots)?;
        // Calibration kernels go first in the batch.
        requests.extend(rc.requests(opts.shots, derive_seed(opts.seed, u64::MAX)));
        Some(rc)
    } else {
        None
    };
    let n_cal = requests.len();
    for (i, g) in groups.iter().enumerate() {
        requests.push(ExecutionRequest {
            kernel: g.kernel.bind_values(theta)?,
            shots: opts.shots,
            seed: derive_seed(opts.seed, i as u64),
        });
    }
    let mut buffers = if requests.is_empty() { Vec::new() } else { accelerator.execute_batch(&requests)? };
    let main = buffers.split_off(n_cal);
    let calibration = match &correction {
        Some(rc) => Some(rc.estimate(buffers)?),
        None => None,
    };

    let mut values: BTreeMap<PauliString, (f64, Option<f64>)> = BTreeMap::new();
    for (g, buffer) in groups.iter().zip(&main) {
        let corrected = match &calibration {
            Some(cal) => Some(correct_counts(buffer, cal)?),
            None => None,
        };
        for term in &g.terms {
            let raw = term_expectation(buffer, term)?;
            let mitigated = corrected.as_ref().map(|b| term_expectation(b, term)).transpose()?;
            values.insert(term.clone(), (raw, mitigated));
        }
    }
    let terms: Vec<TermValue> = non_identity
        .iter()
        .map(|t| {
            let (raw, mitigated) = values[&t.operators];
            TermValue { term: t.operators.clone(), coefficient: t.coefficient, raw, mitigated }
        })
        .collect();
    let energy_raw = check_finite(theta, constant + terms.iter().map(|t| t.coefficient * t.raw).sum::<f64>())?;
    let energy_mitigated = if opts.mitigate {
        let e = constant + terms.iter().map(|t| t.coefficient * t.mitigated.unwrap_or(t.raw)).sum::<f64>();
        Some(check_finite(theta, e)?)
    } else {
        None
    };
    Ok(EnergyPoint { theta: theta.to_vec(), energy_raw, energy_mitigated, terms, calibration })
}

/// Energies over a strictly increasing grid of a single-parameter ansatz.
pub fn sweep(
    grid: &[f64],
    h: &PauliHamiltonian,
    ansatz: &Kernel,
    accelerator: &dyn Accelerator,
    opts: &EnergyOptions,
) -> Result<Vec<EnergyPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("values must be finite and strictly increasing".into()));
    }
    if ansatz.params.len() != 1 {
        return Err(Error::InvalidGrid(format!("ansatz `{}` has {} parameters, sweep needs 1", ansatz.name, ansatz.params.len())));
    }
    grid.iter()
        .enumerate()
        .map(|(i, &theta)| {
            let point_opts = EnergyOptions { seed: derive_seed(opts.seed, i as u64), ..*opts };
            energy_at(&[theta], h, ansatz, accelerator, &point_opts)
        })
        .collect()
}

/// `n` evenly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeResult {
    pub theta: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead over the ansatz parameters. Sampling mode minimizes the
/// mitigated energy when mitigation is on, and stops once the simplex spread
/// is within three shot-noise standard deviations.
pub fn minimize(
    h: &PauliHamiltonian,
    ansatz: &Kernel,
    accelerator: &dyn Accelerator,
    opts: &EnergyOptions,
    init: &[f64],
) -> Result<VqeResult> {
    if ansatz.params.is_empty() {
        return Err(Error::InvalidGrid(format!("ansatz `{}` has no parameters", ansatz.name)));
    }
    if init.len() != ansatz.params.len() {
        return Err(Error::ArityMismatch { callee: ansatz.name.clone(), expected: ansatz.params.len(), found: init.len() });
    }
    let tolerance = if opts.shots == 0 {
        1e-8
    } else {
        let weight: f64 = h.terms.iter().filter(|t| !t.operators.is_identity()).map(|t| t.coefficient * t.coefficient).sum();
        3.0 * libm::sqrt(weight / opts.shots as f64)
    };
    let nm = NelderMeadOptions { tolerance, ..NelderMeadOptions::default() };
    let mut evaluation = 0u64;
    let m = nelder_mead(
        |theta| {
            let eval_opts = EnergyOptions { seed: derive_seed(opts.seed, evaluation), ..*opts };
            evaluation += 1;
            let p = energy_at(theta, h, ansatz, accelerator, &eval_opts)?;
            Ok::<_, Error>(p.energy_mitigated.unwrap_or(p.energy_raw))
        },
        init,
        &nm,
    )?;
    Ok(VqeResult { theta: m.x, energy: m.value, iterations: m.iterations, evaluations: m.evaluations, converged: m.converged })
}
