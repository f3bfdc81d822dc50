//! Dense-matrix reference semantics built from Kronecker products, kept
//! deliberately separate from the simulator's in-place index arithmetic.
#![allow(dead_code)]

use hqc_core::ir::{Axis, Gate1, Gate2, Instruction, Kernel};
use hqc_core::pauli::{Pauli, PauliString};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn mat2(a: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn identity2() -> CMat {
    CMat::identity(2, 2)
}
pub fn pauli_x() -> CMat {
    mat2([[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]])
}
pub fn pauli_y() -> CMat {
    mat2([[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]])
}
pub fn pauli_z() -> CMat {
    mat2([[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]])
}
pub fn hadamard() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    mat2([[c(s, 0.), c(s, 0.)], [c(s, 0.), c(-s, 0.)]])
}

/// `exp(-i θ P / 2) = cos(θ/2) I − i sin(θ/2) P`.
pub fn rotation(p: &CMat, theta: f64) -> CMat {
    identity2() * c((theta / 2.0).cos(), 0.0) - p * c(0.0, (theta / 2.0).sin())
}

/// Operator acting on qubit `q` of an `n`-qubit register; qubit 0 is the
/// rightmost tensor factor.
pub fn embed(op: &CMat, q: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for k in (0..n).rev() {
        let factor = if k == q { op.clone() } else { identity2() };
        out = out.kronecker(&factor);
    }
    out
}

fn embed_many(ops: &[(usize, CMat)], n: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for k in (0..n).rev() {
        let factor = ops.iter().find(|(q, _)| *q == k).map(|(_, m)| m.clone()).unwrap_or_else(identity2);
        out = out.kronecker(&factor);
    }
    out
}

pub fn gate_matrix(inst: &Instruction) -> CMat {
    match inst {
        Instruction::Gate1 { gate, .. } => match gate {
            Gate1::X => pauli_x(),
            Gate1::Y => pauli_y(),
            Gate1::Z => pauli_z(),
            Gate1::H => hadamard(),
        },
        Instruction::Rotation { axis, angle, .. } => {
            let p = match axis {
                Axis::X => pauli_x(),
                Axis::Y => pauli_y(),
                Axis::Z => pauli_z(),
            };
            rotation(&p, angle.value().expect("bound angle"))
        }
        other => panic!("not a one-qubit gate: {other}"),
    }
}

pub fn instruction_unitary(inst: &Instruction, n: usize) -> CMat {
    match inst {
        Instruction::Gate1 { qubit, .. } | Instruction::Rotation { qubit, .. } => embed(&gate_matrix(inst), *qubit, n),
        Instruction::Gate2 { gate: Gate2::Cnot, qubits: [ctl, tgt] } => {
            let p0 = mat2([[c(1., 0.), c(0., 0.)], [c(0., 0.), c(0., 0.)]]);
            let p1 = mat2([[c(0., 0.), c(0., 0.)], [c(0., 0.), c(1., 0.)]]);
            embed_many(&[(*ctl, p0)], n) + embed_many(&[(*ctl, p1), (*tgt, pauli_x())], n)
        }
        Instruction::Gate2 { gate: Gate2::Swap, qubits: [a, b] } => {
            let sum = CMat::identity(1 << n, 1 << n)
                + embed_many(&[(*a, pauli_x()), (*b, pauli_x())], n)
                + embed_many(&[(*a, pauli_y()), (*b, pauli_y())], n)
                + embed_many(&[(*a, pauli_z()), (*b, pauli_z())], n);
            sum * c(0.5, 0.0)
        }
        Instruction::Measure { .. } => CMat::identity(1 << n, 1 << n),
        Instruction::Call { .. } => panic!("unresolved call"),
    }
}

pub fn kernel_unitary(kernel: &Kernel, n: usize) -> CMat {
    kernel.body.iter().fold(CMat::identity(1 << n, 1 << n), |acc, inst| instruction_unitary(inst, n) * acc)
}

pub fn pauli_matrix(p: &PauliString, n: usize) -> CMat {
    let ops: Vec<(usize, CMat)> = p
        .ops()
        .iter()
        .map(|(&q, &op)| {
            let m = match op {
                Pauli::X => pauli_x(),
                Pauli::Y => pauli_y(),
                Pauli::Z => pauli_z(),
            };
            (q, m)
        })
        .collect();
    embed_many(&ops, n)
}

pub fn vector(amps: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(amps)
}

/// `|⟨a|b⟩|²` for normalized vectors.
pub fn fidelity(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    a.dotc(b).norm_sqr()
}

/// `⟨ψ|M|ψ⟩` real part.
pub fn expectation(m: &CMat, psi: &DVector<Complex64>) -> f64 {
    psi.dotc(&(m * psi)).re
}
