//! In-memory kernel IR and its human-readable assembly form.
//!
//! A [`Program`] is an ordered set of named [`Kernel`]s. Kernel bodies are
//! flat instruction lists; composition happens through [`Instruction::Call`]
//! nodes, which [`crate::frontend::resolve_calls`] inlines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::error::{Error, Result};

pub type Qubit = usize;

/// Rotation angle or call argument.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Literal(f64),
    Symbol(String),
    NegSymbol(String),
}

impl Param {
    pub fn symbol(&self) -> Option<&str> {
        match self {
            Param::Literal(_) => None,
            Param::Symbol(s) | Param::NegSymbol(s) => Some(s),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Param::Literal(v) => Some(*v),
            _ => None,
        }
    }

    /// Replaces a symbol with the value bound to it, applying negation.
    pub fn bind(&self, values: &BTreeMap<String, f64>) -> Result<Param> {
        match self {
            Param::Literal(v) => Ok(Param::Literal(*v)),
            Param::Symbol(s) => values
                .get(s)
                .map(|v| Param::Literal(*v))
                .ok_or_else(|| Error::UnboundSymbol(s.clone())),
            Param::NegSymbol(s) => values
                .get(s)
                .map(|v| Param::Literal(-*v))
                .ok_or_else(|| Error::UnboundSymbol(s.clone())),
        }
    }

    /// Substitutes symbols by expressions (call-argument passing).
    pub fn substitute(&self, args: &BTreeMap<&str, &Param>) -> Param {
        match self {
            Param::Literal(v) => Param::Literal(*v),
            Param::Symbol(s) => args.get(s.as_str()).map_or_else(|| self.clone(), |p| (*p).clone()),
            Param::NegSymbol(s) => match args.get(s.as_str()) {
                None => self.clone(),
                Some(Param::Literal(v)) => Param::Literal(-*v),
                Some(Param::Symbol(t)) => Param::NegSymbol(t.clone()),
                Some(Param::NegSymbol(t)) => Param::Symbol(t.clone()),
            },
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // `{}` on f64 is the shortest representation that parses back exactly.
            Param::Literal(v) => write!(f, "{v}"),
            Param::Symbol(s) => f.write_str(s),
            Param::NegSymbol(s) => write!(f, "-{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gate1 {
    X,
    Y,
    Z,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gate2 {
    Cnot,
    Swap,
}

/// Flat instruction kind, as listed in a native gate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    X,
    Y,
    Z,
    H,
    Rx,
    Ry,
    Rz,
    Cnot,
    Swap,
    Measure,
    Call,
}

impl OpKind {
    pub const ALL: [OpKind; 11] = [
        OpKind::X,
        OpKind::Y,
        OpKind::Z,
        OpKind::H,
        OpKind::Rx,
        OpKind::Ry,
        OpKind::Rz,
        OpKind::Cnot,
        OpKind::Swap,
        OpKind::Measure,
        OpKind::Call,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpKind::X => "X",
            OpKind::Y => "Y",
            OpKind::Z => "Z",
            OpKind::H => "H",
            OpKind::Rx => "RX",
            OpKind::Ry => "RY",
            OpKind::Rz => "RZ",
            OpKind::Cnot => "CNOT",
            OpKind::Swap => "SWAP",
            OpKind::Measure => "MEASURE",
            OpKind::Call => "CALL",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<OpKind> {
        OpKind::ALL.into_iter().find(|k| k.mnemonic() == s)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl Gate1 {
    pub fn kind(self) -> OpKind {
        match self {
            Gate1::X => OpKind::X,
            Gate1::Y => OpKind::Y,
            Gate1::Z => OpKind::Z,
            Gate1::H => OpKind::H,
        }
    }
}

impl Axis {
    pub fn kind(self) -> OpKind {
        match self {
            Axis::X => OpKind::Rx,
            Axis::Y => OpKind::Ry,
            Axis::Z => OpKind::Rz,
        }
    }
}

impl Gate2 {
    pub fn kind(self) -> OpKind {
        match self {
            Gate2::Cnot => OpKind::Cnot,
            Gate2::Swap => OpKind::Swap,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Gate1 { gate: Gate1, qubit: Qubit },
    Rotation { axis: Axis, angle: Param, qubit: Qubit },
    /// For CNOT the first operand is the control.
    Gate2 { gate: Gate2, qubits: [Qubit; 2] },
    Measure { qubit: Qubit, cbit: usize },
    Call { callee: String, args: Vec<Param> },
}

impl Instruction {
    pub fn x(q: Qubit) -> Self {
        Instruction::Gate1 { gate: Gate1::X, qubit: q }
    }
    pub fn y(q: Qubit) -> Self {
        Instruction::Gate1 { gate: Gate1::Y, qubit: q }
    }
    pub fn z(q: Qubit) -> Self {
        Instruction::Gate1 { gate: Gate1::Z, qubit: q }
    }
    pub fn h(q: Qubit) -> Self {
        Instruction::Gate1 { gate: Gate1::H, qubit: q }
    }
    pub fn rx(angle: impl Into<Param>, q: Qubit) -> Self {
        Instruction::Rotation { axis: Axis::X, angle: angle.into(), qubit: q }
    }
    pub fn ry(angle: impl Into<Param>, q: Qubit) -> Self {
        Instruction::Rotation { axis: Axis::Y, angle: angle.into(), qubit: q }
    }
    pub fn rz(angle: impl Into<Param>, q: Qubit) -> Self {
        Instruction::Rotation { axis: Axis::Z, angle: angle.into(), qubit: q }
    }
    pub fn cnot(control: Qubit, target: Qubit) -> Self {
        Instruction::Gate2 { gate: Gate2::Cnot, qubits: [control, target] }
    }
    pub fn swap(a: Qubit, b: Qubit) -> Self {
        Instruction::Gate2 { gate: Gate2::Swap, qubits: [a, b] }
    }
    pub fn measure(q: Qubit, cbit: usize) -> Self {
        Instruction::Measure { qubit: q, cbit }
    }
    pub fn call(callee: impl Into<String>, args: Vec<Param>) -> Self {
        Instruction::Call { callee: callee.into(), args }
    }

    pub fn kind(&self) -> OpKind {
        match self {
            Instruction::Gate1 { gate, .. } => gate.kind(),
            Instruction::Rotation { axis, .. } => axis.kind(),
            Instruction::Gate2 { gate, .. } => gate.kind(),
            Instruction::Measure { .. } => OpKind::Measure,
            Instruction::Call { .. } => OpKind::Call,
        }
    }

    /// Qubit operands in order. Calls report none.
    pub fn qubits(&self) -> &[Qubit] {
        match self {
            Instruction::Gate1 { qubit, .. }
            | Instruction::Rotation { qubit, .. }
            | Instruction::Measure { qubit, .. } => core::slice::from_ref(qubit),
            Instruction::Gate2 { qubits, .. } => qubits,
            Instruction::Call { .. } => &[],
        }
    }

    pub fn param(&self) -> Option<&Param> {
        match self {
            Instruction::Rotation { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Symbols referenced by this instruction (angle or call arguments).
    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        let params: &[Param] = match self {
            Instruction::Rotation { angle, .. } => core::slice::from_ref(angle),
            Instruction::Call { args, .. } => args,
            _ => &[],
        };
        params.iter().filter_map(Param::symbol)
    }

    /// Applies `f` to each qubit operand.
    pub fn map_qubits(&self, mut f: impl FnMut(Qubit) -> Qubit) -> Instruction {
        match self {
            Instruction::Gate1 { gate, qubit } => Instruction::Gate1 { gate: *gate, qubit: f(*qubit) },
            Instruction::Rotation { axis, angle, qubit } => {
                Instruction::Rotation { axis: *axis, angle: angle.clone(), qubit: f(*qubit) }
            }
            Instruction::Gate2 { gate, qubits } => {
                Instruction::Gate2 { gate: *gate, qubits: [f(qubits[0]), f(qubits[1])] }
            }
            Instruction::Measure { qubit, cbit } => Instruction::Measure { qubit: f(*qubit), cbit: *cbit },
            Instruction::Call { .. } => self.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Instruction::Gate2 { gate, qubits: [a, b] } = self {
            if a == b {
                return Err(Error::InvalidInstruction(format!("{} on repeated qubit {a}", gate.kind())));
            }
        }
        Ok(())
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Literal(v)
    }
}

impl From<&str> for Param {
    fn from(s: &str) -> Self {
        match s.strip_prefix('-') {
            Some(rest) => Param::NegSymbol(rest.to_string()),
            None => Param::Symbol(s.to_string()),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Gate1 { gate, qubit } => write!(f, "{} {qubit}", gate.kind()),
            Instruction::Rotation { axis, angle, qubit } => write!(f, "{}({angle}) {qubit}", axis.kind()),
            Instruction::Gate2 { gate, qubits: [a, b] } => write!(f, "{} {a} {b}", gate.kind()),
            Instruction::Measure { qubit, cbit } => write!(f, "MEASURE {qubit} [{cbit}]"),
            Instruction::Call { callee, args } => {
                write!(f, "{callee}(b")?;
                for a in args {
                    write!(f, ",{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Instruction>,
}

impl Kernel {
    pub fn new(name: impl Into<String>, params: Vec<String>, body: Vec<Instruction>) -> Self {
        Self { name: name.into(), params, body }
    }

    /// Executable width: highest qubit index plus one (zero for an empty body).
    pub fn width(&self) -> usize {
        self.body.iter().flat_map(|i| i.qubits().iter().copied()).max().map_or(0, |q| q + 1)
    }

    pub fn has_calls(&self) -> bool {
        self.body.iter().any(|i| matches!(i, Instruction::Call { .. }))
    }

    pub fn is_bound(&self) -> bool {
        self.body.iter().all(|i| i.symbols().next().is_none())
    }

    /// `(qubit, cbit)` pairs of every MEASURE, sorted by classical bit.
    pub fn measurements(&self) -> Vec<(Qubit, usize)> {
        let mut m: Vec<_> = self
            .body
            .iter()
            .filter_map(|i| match i {
                Instruction::Measure { qubit, cbit } => Some((*qubit, *cbit)),
                _ => None,
            })
            .collect();
        m.sort_by_key(|&(_, c)| c);
        m
    }

    /// Substitutes every parameter symbol, returning a fully literal kernel.
    pub fn bind_parameters(&self, values: &BTreeMap<String, f64>) -> Result<Kernel> {
        let body = self
            .body
            .iter()
            .map(|inst| {
                Ok(match inst {
                    Instruction::Rotation { axis, angle, qubit } => {
                        Instruction::Rotation { axis: *axis, angle: angle.bind(values)?, qubit: *qubit }
                    }
                    Instruction::Call { callee, args } => Instruction::Call {
                        callee: callee.clone(),
                        args: args.iter().map(|a| a.bind(values)).collect::<Result<_>>()?,
                    },
                    other => other.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel { name: self.name.clone(), params: Vec::new(), body })
    }

    /// Binds parameters positionally against `self.params`.
    pub fn bind_values(&self, values: &[f64]) -> Result<Kernel> {
        if values.len() != self.params.len() {
            return Err(Error::ArityMismatch {
                callee: self.name.clone(),
                expected: self.params.len(),
                found: values.len(),
            });
        }
        let map = self.params.iter().cloned().zip(values.iter().copied()).collect();
        self.bind_parameters(&map)
    }

    /// Checks per-kernel invariants: operand shape, symbol scoping, cbit uniqueness.
    pub fn validate(&self) -> Result<()> {
        let params: BTreeSet<&str> = self.params.iter().map(String::as_str).collect();
        if params.len() != self.params.len() {
            return Err(Error::InvalidInstruction(format!("kernel `{}` repeats a parameter name", self.name)));
        }
        let mut cbits = BTreeSet::new();
        for inst in &self.body {
            inst.validate()?;
            if let Some(s) = inst.symbols().find(|s| !params.contains(s)) {
                return Err(Error::UnboundSymbol(s.to_string()));
            }
            if let Instruction::Measure { cbit, .. } = inst {
                if !cbits.insert(*cbit) {
                    return Err(Error::DuplicateCbit { kernel: self.name.clone(), cbit: *cbit });
                }
            }
        }
        Ok(())
    }

    fn write_assembly(&self, out: &mut String) {
        let _ = write!(out, "__qpu__ {}(AcceleratorBuffer b", self.name);
        for p in &self.params {
            let _ = write!(out, ", double {p}");
        }
        out.push_str(") {\n");
        for inst in &self.body {
            let _ = writeln!(out, "    {inst}");
        }
        out.push_str("}\n");
    }
}

/// Ordered collection of uniquely named kernels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    kernels: Vec<Kernel>,
}

impl Program {
    /// Builds a program and checks every invariant: unique names, known
    /// callees with matching arity, acyclic calls and per-kernel validity.
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        let program = Program { kernels };
        program.validate()?;
        Ok(program)
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn into_kernels(self) -> Vec<Kernel> {
        self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Kernel> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.kernels.iter().map(|k| k.name.as_str())
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for (i, k) in self.kernels.iter().enumerate() {
            if seen.insert(k.name.as_str(), i).is_some() {
                return Err(Error::DuplicateKernel(k.name.clone()));
            }
        }
        for k in &self.kernels {
            k.validate()?;
            for inst in &k.body {
                if let Instruction::Call { callee, args } = inst {
                    let target = seen.get(callee.as_str()).map(|&i| &self.kernels[i]);
                    let target = target.ok_or_else(|| Error::UnknownKernel(callee.clone()))?;
                    if target.params.len() != args.len() {
                        return Err(Error::ArityMismatch {
                            callee: callee.clone(),
                            expected: target.params.len(),
                            found: args.len(),
                        });
                    }
                }
            }
        }
        self.check_acyclic(&seen)
    }

    fn check_acyclic(&self, index: &BTreeMap<&str, usize>) -> Result<()> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = alloc::vec![0u8; self.kernels.len()];
        for start in 0..self.kernels.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = alloc::vec![(start, 0)];
            state[start] = 1;
            while let Some((node, pos)) = stack.pop() {
                let callees: Vec<usize> = self.kernels[node]
                    .body
                    .iter()
                    .filter_map(|i| match i {
                        Instruction::Call { callee, .. } => index.get(callee.as_str()).copied(),
                        _ => None,
                    })
                    .collect();
                if let Some(&next) = callees.get(pos) {
                    stack.push((node, pos + 1));
                    match state[next] {
                        0 => {
                            state[next] = 1;
                            stack.push((next, 0));
                        }
                        1 => return Err(Error::CyclicCall(self.kernels[next].name.clone())),
                        _ => {}
                    }
                } else {
                    state[node] = 2;
                }
            }
        }
        Ok(())
    }

    /// Renders the program in the kernel language accepted by [`crate::frontend::parse`].
    pub fn to_assembly(&self) -> String {
        let mut out = String::new();
        for k in &self.kernels {
            k.write_assembly(&mut out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ansatz() -> Kernel {
        Kernel::new("ansatz", vec!["t0".into()], vec![Instruction::x(0), Instruction::ry("t0", 1), Instruction::cnot(1, 0)])
    }

    #[test]
    fn assembly_of_ansatz() {
        let p = Program::new(vec![ansatz()]).unwrap();
        assert_eq!(
            p.to_assembly(),
            "__qpu__ ansatz(AcceleratorBuffer b, double t0) {\n    X 0\n    RY(t0) 1\n    CNOT 1 0\n}\n"
        );
    }

    #[test]
    fn empty_program_renders_empty() {
        assert_eq!(Program::default().to_assembly(), "");
    }

    #[test]
    fn call_renders_buffer_argument() {
        let z0 = Kernel::new(
            "z0",
            vec!["t0".into()],
            vec![Instruction::call("ansatz", vec!["t0".into()]), Instruction::measure(0, 0)],
        );
        let p = Program::new(vec![ansatz(), z0]).unwrap();
        assert!(p.to_assembly().lines().any(|l| l.trim() == "ansatz(b,t0)"));
    }

    #[test]
    fn bind_substitutes_and_clears_params() {
        let values = [("t0".to_string(), 0.5945)].into_iter().collect();
        let k = ansatz().bind_parameters(&values).unwrap();
        assert_eq!(k.body[1], Instruction::ry(0.5945, 1));
        assert!(k.params.is_empty());
        assert_eq!(k.bind_parameters(&BTreeMap::new()).unwrap(), k);

        let zero = ansatz().bind_values(&[0.0]).unwrap();
        assert_eq!(zero.body[1], Instruction::ry(0.0, 1));
    }

    #[test]
    fn bind_missing_symbol_names_it() {
        let err = ansatz().bind_parameters(&BTreeMap::new()).unwrap_err();
        assert_eq!(err.to_string(), "unbound t0");
    }

    #[test]
    fn negated_symbol_binds_negative() {
        let k = Kernel::new("k", vec!["a".into()], vec![Instruction::rz("-a", 0)]);
        let b = k.bind_values(&[0.25]).unwrap();
        assert_eq!(b.body[0], Instruction::rz(-0.25, 0));
    }

    #[test]
    fn program_rejects_bad_structure() {
        let dup = Program::new(vec![ansatz(), ansatz()]);
        assert_eq!(dup.unwrap_err(), Error::DuplicateKernel("ansatz".into()));

        let unknown = Kernel::new("k", vec![], vec![Instruction::call("nope", vec![])]);
        assert_eq!(Program::new(vec![unknown]).unwrap_err(), Error::UnknownKernel("nope".into()));

        let a = Kernel::new("a", vec![], vec![Instruction::call("b", vec![])]);
        let b = Kernel::new("b", vec![], vec![Instruction::call("a", vec![])]);
        assert!(matches!(Program::new(vec![a, b]), Err(Error::CyclicCall(_))));

        let selfcall = Kernel::new("a", vec![], vec![Instruction::call("a", vec![])]);
        assert!(matches!(Program::new(vec![selfcall]), Err(Error::CyclicCall(_))));

        let arity = Kernel::new("k", vec![], vec![Instruction::call("ansatz", vec![])]);
        assert!(matches!(Program::new(vec![ansatz(), arity]), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn kernel_invariants() {
        let same = Kernel::new("k", vec![], vec![Instruction::cnot(1, 1)]);
        assert!(matches!(same.validate(), Err(Error::InvalidInstruction(_))));

        let cb = Kernel::new("k", vec![], vec![Instruction::measure(0, 0), Instruction::measure(1, 0)]);
        assert!(matches!(cb.validate(), Err(Error::DuplicateCbit { .. })));

        let free = Kernel::new("k", vec![], vec![Instruction::rx("phi", 0)]);
        assert_eq!(free.validate().unwrap_err(), Error::UnboundSymbol("phi".into()));
    }

    #[test]
    fn width_and_measurements() {
        let k = Kernel::new("k", vec![], vec![Instruction::h(3), Instruction::measure(3, 1), Instruction::measure(0, 0)]);
        assert_eq!(k.width(), 4);
        assert_eq!(k.measurements(), vec![(0, 0), (3, 1)]);
        assert_eq!(Kernel::new("e", vec![], vec![]).width(), 0);
    }

    #[test]
    fn substitution_handles_negation() {
        let a = Param::Symbol("x".into());
        let lit = Param::Literal(2.0);
        let neg = Param::NegSymbol("y".into());
        let mut args = BTreeMap::new();
        args.insert("t", &lit);
        assert_eq!(Param::NegSymbol("t".into()).substitute(&args), Param::Literal(-2.0));
        args.insert("t", &neg);
        assert_eq!(Param::NegSymbol("t".into()).substitute(&args), Param::Symbol("y".into()));
        args.insert("t", &a);
        assert_eq!(Param::NegSymbol("t".into()).substitute(&args), Param::NegSymbol("x".into()));
    }
}
