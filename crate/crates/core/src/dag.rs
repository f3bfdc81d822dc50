//! Dependency-graph form of a call-free kernel.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ir::{Instruction, Kernel, Qubit};

/// Nodes are the kernel's instructions in body order; an edge `(a, b)` means
/// `b` is the next instruction after `a` on some shared qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDag {
    nodes: Vec<Instruction>,
    edges: BTreeSet<(usize, usize)>,
}

impl CircuitDag {
    pub fn from_kernel(kernel: &Kernel) -> Result<Self> {
        let mut last: BTreeMap<Qubit, usize> = BTreeMap::new();
        let mut edges = BTreeSet::new();
        for (i, inst) in kernel.body.iter().enumerate() {
            if let Instruction::Call { callee, .. } = inst {
                return Err(Error::UnresolvedCall(callee.clone()));
            }
            for &q in inst.qubits() {
                if let Some(prev) = last.insert(q, i) {
                    edges.insert((prev, i));
                }
            }
        }
        Ok(Self { nodes: kernel.body.clone(), edges })
    }

    pub fn nodes(&self) -> &[Instruction] {
        &self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn predecessors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == node).map(|e| e.0)
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((node, 0)..(node + 1, 0)).map(|e| e.1)
    }

    /// Kahn's algorithm; ties broken by smallest node index.
    pub fn topological_order(&self) -> Vec<usize> {
        self.topological_order_by(|ready| ready.iter().next().copied())
    }

    /// Kahn's algorithm with a caller-chosen pick among ready nodes. `pick` is
    /// only called with a non-empty set; returning `None` or a node that is
    /// not ready ends the walk early.
    pub fn topological_order_by(&self, mut pick: impl FnMut(&BTreeSet<usize>) -> Option<usize>) -> Vec<usize> {
        let mut indegree = vec![0usize; self.nodes.len()];
        for &(_, b) in &self.edges {
            indegree[b] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while !ready.is_empty() {
            let Some(n) = pick(&ready).filter(|n| ready.contains(n)) else { break };
            ready.remove(&n);
            order.push(n);
            for s in self.successors(n).collect::<Vec<_>>() {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        order
    }

    /// Rebuilds a kernel body from a node order.
    pub fn replay(&self, order: &[usize]) -> Vec<Instruction> {
        order.iter().map(|&i| self.nodes[i].clone()).collect()
    }

    /// Graphviz text, one node per instruction labelled `kind qubits [param]`.
    pub fn to_dot(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{name}\" {{");
        for (i, inst) in self.nodes.iter().enumerate() {
            let mut label = String::from(inst.kind().mnemonic());
            for q in inst.qubits() {
                let _ = write!(label, " {q}");
            }
            if let Some(p) = inst.param() {
                let _ = write!(label, " {p}");
            }
            if let Instruction::Measure { cbit, .. } = inst {
                let _ = write!(label, " [{cbit}]");
            }
            let _ = writeln!(out, "  n{i} [label=\"{label}\"];");
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "  n{a} -> n{b};");
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(body: Vec<Instruction>) -> Kernel {
        Kernel::new("k", Vec::new(), body)
    }

    #[test]
    fn ansatz_dag() {
        let k = kernel(vec![Instruction::x(0), Instruction::ry(0.1, 1), Instruction::cnot(1, 0)]);
        let dag = CircuitDag::from_kernel(&k).unwrap();
        assert_eq!(dag.nodes().len(), 3);
        assert_eq!(dag.edges().collect::<Vec<_>>(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn small_cases() {
        let one = CircuitDag::from_kernel(&kernel(vec![Instruction::h(0)])).unwrap();
        assert_eq!((one.nodes().len(), one.edge_count()), (1, 0));
        let disjoint = CircuitDag::from_kernel(&kernel(vec![Instruction::h(0), Instruction::h(1)])).unwrap();
        assert_eq!((disjoint.nodes().len(), disjoint.edge_count()), (2, 0));
    }

    #[test]
    fn rejects_calls() {
        let k = kernel(vec![Instruction::call("f", Vec::new())]);
        assert_eq!(CircuitDag::from_kernel(&k).unwrap_err(), Error::UnresolvedCall("f".into()));
    }

    #[test]
    fn dot_labels() {
        let k = kernel(vec![Instruction::rx(0.5, 0), Instruction::measure(0, 0)]);
        let dot = CircuitDag::from_kernel(&k).unwrap().to_dot("k");
        assert!(dot.contains("n0 [label=\"RX 0 0.5\"]"));
        assert!(dot.contains("n0 -> n1"));
    }
}
