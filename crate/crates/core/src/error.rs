use alloc::string::String;
use core::fmt;

use crate::ir::OpKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// 1-based position in kernel source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceLocation {
    pub line: u32,
    pub column: u32,
}

impl SourceLocation {
    pub fn new(line: u32, column: u32) -> Self {
        debug_assert!(line >= 1 && column >= 1);
        Self { line, column }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{location}: {message}")]
    Syntax { location: SourceLocation, message: String },
    #[error("duplicate kernel `{0}`")]
    DuplicateKernel(String),
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("call to `{callee}` takes {expected} argument(s), got {found}")]
    ArityMismatch { callee: String, expected: usize, found: usize },
    #[error("cyclic kernel call through `{0}`")]
    CyclicCall(String),
    #[error("unbound {0}")]
    UnboundSymbol(String),
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("classical bit {cbit} written twice in kernel `{kernel}`")]
    DuplicateCbit { kernel: String, cbit: usize },
    #[error("unresolved call to `{0}`; resolve calls first")]
    UnresolvedCall(String),
    #[error("symbolic parameter `{0}`; bind parameters first")]
    SymbolicParameter(String),
    #[error("kernel uses {width} qubit(s) but the topology has {available}")]
    TooWide { width: usize, available: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid native gate set: {0}")]
    InvalidGateSet(String),
    #[error("{0} cannot be lowered to the native gate set")]
    NotLowerable(OpKind),
    #[error("{width} qubits exceeds the simulator cap of {cap}")]
    WidthCap { width: usize, cap: usize },
    #[error("kernel has no MEASURE instruction")]
    NoMeasurement,
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("qubit {0} is used after being measured")]
    MidCircuitMeasurement(usize),
    #[error("malformed Pauli string `{0}`")]
    InvalidPauli(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("no calibration data for qubit {0}")]
    MissingCalibration(usize),
    #[error("readout calibration for qubit {0} is not invertible (p0 + p1 >= 1)")]
    NonInvertible(usize),
    #[error("line {line}: {message}")]
    Hamiltonian { line: usize, message: String },
    #[error("term {term} is not covered by the measured qubits")]
    SupportMismatch { term: String },
    #[error("invalid parameter grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite energy at parameters {0}")]
    NonFiniteEnergy(String),
    #[error("accelerator `{0}` does not support exact expectation values")]
    ExactUnsupported(String),
    #[error("backend error: {0}")]
    Backend(String),
}
