//! Pauli operators and tensor-product strings.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::error::Error;
use crate::ir::Qubit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; qubits not listed carry identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    ops: BTreeMap<Qubit, Pauli>,
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_ops(ops: impl IntoIterator<Item = (Qubit, Pauli)>) -> Self {
        Self { ops: ops.into_iter().collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &BTreeMap<Qubit, Pauli> {
        &self.ops
    }

    pub fn get(&self, q: Qubit) -> Option<Pauli> {
        self.ops.get(&q).copied()
    }

    /// Support qubits in ascending order.
    pub fn support(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.ops.keys().copied()
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    /// Smallest register that contains the support.
    pub fn width(&self) -> usize {
        self.ops.keys().next_back().map_or(0, |q| q + 1)
    }

    /// True when the two strings agree on every qubit they share.
    pub fn qubitwise_commutes(&self, other: &PauliString) -> bool {
        self.ops.iter().all(|(q, p)| other.ops.get(q).is_none_or(|o| o == p))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return f.write_str("I");
        }
        for (q, p) in &self.ops {
            write!(f, "{}{q}", p.letter())?;
        }
        Ok(())
    }
}

/// Parses `I`, `Z0`, `X0X1`, `X0 Y3` and the like. Whitespace between
/// factors is allowed; `I` factors are ignored.
impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidPauli(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        let mut ops = BTreeMap::new();
        let bytes = compact.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let letter = bytes[i];
            i += 1;
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let index = &compact[start..i];
            let pauli = match letter {
                b'I' | b'i' => continue,
                b'X' | b'x' => Pauli::X,
                b'Y' | b'y' => Pauli::Y,
                b'Z' | b'z' => Pauli::Z,
                _ => return Err(bad()),
            };
            let q: Qubit = index.parse().map_err(|_| bad())?;
            if ops.insert(q, pauli).is_some() {
                return Err(bad());
            }
        }
        Ok(PauliString { ops })
    }
}
