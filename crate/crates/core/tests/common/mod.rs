#![allow(dead_code)]

use hqc_core::accel::StateVector;
use hqc_core::ir::{Instruction, Kernel, Param, Program};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEUTERON_QK: &str = "\
__qpu__ ansatz(AcceleratorBuffer b, double t0) {
    X 0
    RY(t0) 1
    CNOT 1 0
}
__qpu__ z0(AcceleratorBuffer b, double t0) {
    ansatz(b,t0)
    MEASURE 0 [0]
}
__qpu__ z1(AcceleratorBuffer b, double t0) {
    ansatz(b,t0)
    MEASURE 1 [1]
}
 __qpu__ x0x1(AcceleratorBuffer b, double t0) {
    ansatz(b,t0)
    H 0
    H 1
    MEASURE 0 [0]
    MEASURE 1 [1]
}
__qpu__ y0y1(AcceleratorBuffer b, double t0) {
    ansatz(b,t0)
    RX(1.57079) 0
    RX(1.57079) 1
    MEASURE 0 [0]
    MEASURE 1 [1]
}
";

/// Haar-ish random state from Gaussian amplitudes.
pub fn random_state(qubits: usize, rng: &mut ChaCha8Rng) -> StateVector {
    let amps: Vec<Complex64> = (0..1usize << qubits)
        .map(|_| {
            let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
            let r = (-2.0 * u1.ln()).sqrt();
            let phi = std::f64::consts::TAU * u2;
            Complex64::new(r * phi.cos(), r * phi.sin())
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bound, call-free, measurement-free gate over `qubits` qubits.
pub fn random_gate(qubits: usize, rng: &mut ChaCha8Rng) -> Instruction {
    let q = rng.random_range(0..qubits);
    let other = |rng: &mut ChaCha8Rng| {
        let mut r = rng.random_range(0..qubits - 1);
        if r >= q {
            r += 1;
        }
        r
    };
    let choices = if qubits > 1 { 9 } else { 7 };
    let angle = |rng: &mut ChaCha8Rng| rng.random_range(-7.0..7.0);
    match rng.random_range(0..choices) {
        0 => Instruction::x(q),
        1 => Instruction::y(q),
        2 => Instruction::z(q),
        3 => Instruction::h(q),
        4 => Instruction::rx(angle(rng), q),
        5 => Instruction::ry(angle(rng), q),
        6 => Instruction::rz(angle(rng), q),
        7 => Instruction::cnot(q, other(rng)),
        _ => Instruction::swap(q, other(rng)),
    }
}

pub fn random_kernel(qubits: usize, gates: usize, rng: &mut ChaCha8Rng) -> Kernel {
    Kernel::new("k", Vec::new(), (0..gates).map(|_| random_gate(qubits, rng)).collect())
}

/// Kernel biased toward cancellable and mergeable neighbours.
pub fn redundant_kernel(qubits: usize, gates: usize, rng: &mut ChaCha8Rng) -> Kernel {
    let mut body = Vec::new();
    while body.len() < gates {
        let g = random_gate(qubits, rng);
        if rng.random_bool(0.4) {
            let twin = match &g {
                Instruction::Rotation { axis, qubit, .. } => {
                    Instruction::Rotation { axis: *axis, angle: Param::Literal(rng.random_range(-4.0..4.0)), qubit: *qubit }
                }
                other => other.clone(),
            };
            body.push(g);
            body.push(twin);
        } else {
            body.push(g);
        }
    }
    Kernel::new("k", Vec::new(), body)
}

fn param_strategy(symbols: Vec<String>) -> BoxedStrategy<Param> {
    let lit = prop_oneof![
        (-1e3f64..1e3).prop_map(Param::Literal),
        Just(Param::Literal(1.57079)),
        (-5i32..5).prop_map(|i| Param::Literal(i as f64)),
    ];
    if symbols.is_empty() {
        lit.boxed()
    } else {
        let s1 = symbols.clone();
        prop_oneof![
            lit,
            proptest::sample::select(s1).prop_map(Param::Symbol),
            proptest::sample::select(symbols).prop_map(Param::NegSymbol),
        ]
        .boxed()
    }
}

fn instruction_strategy(symbols: Vec<String>, callees: Vec<(String, usize)>) -> BoxedStrategy<Instruction> {
    let q = 0usize..6;
    let pair = (0usize..6, 1usize..6).prop_map(|(a, d)| (a, (a + d) % 6));
    let mut options: Vec<BoxedStrategy<Instruction>> = vec![
        (0u8..4, q.clone())
            .prop_map(|(g, q)| match g {
                0 => Instruction::x(q),
                1 => Instruction::y(q),
                2 => Instruction::z(q),
                _ => Instruction::h(q),
            })
            .boxed(),
        (0u8..3, param_strategy(symbols.clone()), q.clone())
            .prop_map(|(a, p, q)| match a {
                0 => Instruction::rx(p, q),
                1 => Instruction::ry(p, q),
                _ => Instruction::rz(p, q),
            })
            .boxed(),
        (any::<bool>(), pair).prop_map(|(c, (a, b))| if c { Instruction::cnot(a, b) } else { Instruction::swap(a, b) }).boxed(),
    ];
    if !callees.is_empty() {
        let syms = symbols.clone();
        options.push(
            proptest::sample::select(callees)
                .prop_flat_map(move |(name, arity)| {
                    proptest::collection::vec(param_strategy(syms.clone()), arity)
                        .prop_map(move |args| Instruction::call(name.clone(), args))
                })
                .boxed(),
        );
    }
    proptest::strategy::Union::new(options).boxed()
}

fn kernel_strategy(index: usize, callees: Vec<(String, usize)>) -> BoxedStrategy<Kernel> {
    (0usize..3, 0usize..4)
        .prop_flat_map(move |(nparams, nmeasure)| {
            let params: Vec<String> = (0..nparams).map(|i| format!("p{index}_{i}")).collect();
            let body = proptest::collection::vec(instruction_strategy(params.clone(), callees.clone()), 0..8);
            let measures = proptest::collection::vec(0usize..6, nmeasure);
            (Just(params), body, measures).prop_map(move |(params, mut body, measures)| {
                body.extend(measures.into_iter().enumerate().map(|(c, q)| Instruction::measure(q, c)));
                Kernel::new(format!("k{index}"), params, body)
            })
        })
        .boxed()
}

/// Random valid programs: kernel `k_i` may call any `k_j` with `j < i`.
pub fn program_strategy() -> impl Strategy<Value = Program> {
    (1usize..5).prop_flat_map(|n| {
        let mut strat: BoxedStrategy<Vec<Kernel>> = Just(Vec::new()).boxed();
        for i in 0..n {
            strat = strat
                .prop_flat_map(move |prev: Vec<Kernel>| {
                    // Only measurement-free kernels are callable, so inlining
                    // never duplicates a classical bit.
                    let callees = prev
                        .iter()
                        .filter(|k| k.measurements().is_empty())
                        .map(|k| (k.name.clone(), k.params.len()))
                        .collect();
                    (Just(prev), kernel_strategy(i, callees)).prop_map(|(mut prev, k)| {
                        prev.push(k);
                        prev
                    })
                })
                .boxed();
        }
        strat.prop_map(|ks| Program::new(ks).expect("generator yields valid programs"))
    })
}
pub mod oracle;

/// The deuteron ansatz with its parameter still symbolic.
pub fn deuteron_ansatz() -> Kernel {
    let program = hqc_core::parse(DEUTERON_QK).unwrap();
    hqc_core::resolve_calls(&program, "ansatz").unwrap()
}
