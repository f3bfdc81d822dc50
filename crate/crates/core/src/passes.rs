//! Compilation layers: pre-processing, optimization, topology
//! transformation and lowering to a native gate set.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::ir::{Axis, Gate1, Gate2, Instruction, Kernel, OpKind, Param, Qubit};
use crate::mitigation::PostProcessor;

/// Angles closer than this to a multiple of 2π count as zero.
pub const ZERO_ANGLE_TOL: f64 = 1e-12;

/// Hardware connectivity: undirected, connected, no self-edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    qubit_count: usize,
    edges: BTreeSet<(Qubit, Qubit)>,
}

impl Topology {
    pub fn new(qubit_count: usize, edges: impl IntoIterator<Item = (Qubit, Qubit)>) -> Result<Self> {
        if qubit_count == 0 {
            return Err(Error::InvalidTopology("no qubits".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidTopology(format!("self-edge on qubit {a}")));
            }
            if a >= qubit_count || b >= qubit_count {
                return Err(Error::InvalidTopology(format!("edge ({a}, {b}) outside {qubit_count} qubits")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let topo = Self { qubit_count, edges: set };
        let reached = topo.distances_from(0).iter().filter(|d| d.is_some()).count();
        if reached != qubit_count {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        Ok(topo)
    }

    /// `0 – 1 – … – (n-1)`.
    pub fn line(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn fully_connected(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))))
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (Qubit, Qubit)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_edge(&self, a: Qubit, b: Qubit) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, q: Qubit) -> impl Iterator<Item = Qubit> + '_ {
        self.edges.iter().filter_map(move |&(a, b)| {
            if a == q {
                Some(b)
            } else if b == q {
                Some(a)
            } else {
                None
            }
        })
    }

    fn distances_from(&self, start: Qubit) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.qubit_count];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            let d = dist[q].unwrap_or(0);
            for n in self.neighbors(q) {
                if dist[n].is_none() {
                    dist[n] = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// BFS shortest path, endpoints included; smallest-index neighbors first.
    pub fn shortest_path(&self, from: Qubit, to: Qubit) -> Vec<Qubit> {
        let mut parent: BTreeMap<Qubit, Qubit> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(q) = queue.pop_front() {
            if q == to {
                break;
            }
            for n in self.neighbors(q) {
                if seen.insert(n) {
                    parent.insert(n, q);
                    queue.push_back(n);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[&cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// Instruction kinds a target executes directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NativeGateSet {
    kinds: BTreeSet<OpKind>,
}

impl Default for NativeGateSet {
    /// `{RX, RZ, CNOT, MEASURE}`.
    fn default() -> Self {
        Self { kinds: BTreeSet::from([OpKind::Rx, OpKind::Rz, OpKind::Cnot, OpKind::Measure]) }
    }
}

impl NativeGateSet {
    pub fn new(kinds: impl IntoIterator<Item = OpKind>) -> Result<Self> {
        let kinds: BTreeSet<OpKind> = kinds.into_iter().collect();
        if !kinds.contains(&OpKind::Cnot) && !kinds.contains(&OpKind::Swap) {
            return Err(Error::InvalidGateSet("no entangling two-qubit gate".into()));
        }
        if !kinds.contains(&OpKind::Measure) {
            return Err(Error::InvalidGateSet("MEASURE missing".into()));
        }
        if kinds.contains(&OpKind::Call) {
            return Err(Error::InvalidGateSet("CALL is not an instruction a device executes".into()));
        }
        Ok(Self { kinds })
    }

    pub fn contains(&self, kind: OpKind) -> bool {
        self.kinds.contains(&kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = OpKind> + '_ {
        self.kinds.iter().copied()
    }
}

/// Logical → physical qubit map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout(Vec<Qubit>);

impl Layout {
    pub fn identity(n: usize) -> Self {
        Layout((0..n).collect())
    }

    pub fn physical(&self, logical: Qubit) -> Qubit {
        self.0.get(logical).copied().unwrap_or(logical)
    }

    pub fn as_slice(&self) -> &[Qubit] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// Layout of applying `self`, then `next`.
    pub fn then(&self, next: &Layout) -> Layout {
        let n = self.0.len().max(next.0.len());
        Layout((0..n).map(|l| next.physical(self.physical(l))).collect())
    }

    fn swap_physical(&mut self, a: Qubit, b: Qubit) {
        for p in &mut self.0 {
            if *p == a {
                *p = b;
            } else if *p == b {
                *p = a;
            }
        }
    }
}

/// Target description shared by passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub topology: Topology,
    pub native: NativeGateSet,
}

/// Kernel → kernel rewrite.
pub trait Pass {
    fn name(&self) -> &str;

    /// Rewrites `kernel`. Passes that permute qubits compose their permutation into `layout`.
    fn run(&self, kernel: Kernel, target: &Target, layout: &mut Layout) -> Result<Kernel>;
}

/// IR pre-processor that may emit a post-processing step.
pub trait PreProcessor {
    fn name(&self) -> &str;
    fn preprocess(&self, kernel: Kernel) -> Result<(Kernel, Option<PostProcessor>)>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CancelInversePairs;

#[derive(Debug, Clone, Copy, Default)]
pub struct MergeRotations;

#[derive(Debug, Clone, Copy, Default)]
pub struct RouteSwaps;

#[derive(Debug, Clone, Copy, Default)]
pub struct LowerToNative;

impl Pass for CancelInversePairs {
    fn name(&self) -> &str {
        "cancel"
    }
    fn run(&self, kernel: Kernel, _: &Target, _: &mut Layout) -> Result<Kernel> {
        cancel_inverse_pairs(&kernel)
    }
}

impl Pass for MergeRotations {
    fn name(&self) -> &str {
        "merge"
    }
    fn run(&self, kernel: Kernel, _: &Target, _: &mut Layout) -> Result<Kernel> {
        merge_rotations(&kernel)
    }
}

impl Pass for RouteSwaps {
    fn name(&self) -> &str {
        "route"
    }
    fn run(&self, kernel: Kernel, target: &Target, layout: &mut Layout) -> Result<Kernel> {
        let (routed, fin) = route_swaps(&kernel, &target.topology)?;
        *layout = layout.then(&fin);
        Ok(routed)
    }
}

impl Pass for LowerToNative {
    fn name(&self) -> &str {
        "lower"
    }
    fn run(&self, kernel: Kernel, target: &Target, _: &mut Layout) -> Result<Kernel> {
        lower_to_native(&kernel, &target.native)
    }
}

/// Ordered pass layers. Layers always run pre → optimize → transform → lower.
#[derive(Default)]
pub struct PassPipeline {
    pub pre_processors: Vec<Box<dyn PreProcessor>>,
    pub optimizers: Vec<Box<dyn Pass>>,
    pub transformations: Vec<Box<dyn Pass>>,
    pub lower: bool,
}

impl core::fmt::Debug for PassPipeline {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("PassPipeline")
            .field("pre_processors", &self.pre_processors.iter().map(|p| p.name()).collect::<Vec<_>>())
            .field("optimizers", &self.optimizers.iter().map(|p| p.name()).collect::<Vec<_>>())
            .field("transformations", &self.transformations.iter().map(|p| p.name()).collect::<Vec<_>>())
            .field("lower", &self.lower)
            .finish()
    }
}

impl PassPipeline {
    /// No pre-processing, optimization or transformation; lowering only.
    pub fn lowering_only() -> Self {
        Self { lower: true, ..Self::default() }
    }

    /// cancel, merge, route, lower.
    pub fn standard() -> Self {
        Self {
            pre_processors: Vec::new(),
            optimizers: vec![Box::new(CancelInversePairs), Box::new(MergeRotations)],
            transformations: vec![Box::new(RouteSwaps)],
            lower: true,
        }
    }

    /// Builds a pipeline from pass names (`cancel`, `merge`, `route`, `lower`),
    /// placing each in its layer while keeping the given order within layers.
    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut p = Self::default();
        for name in names {
            match name.trim() {
                "cancel" => p.optimizers.push(Box::new(CancelInversePairs)),
                "merge" => p.optimizers.push(Box::new(MergeRotations)),
                "route" => p.transformations.push(Box::new(RouteSwaps)),
                "lower" => p.lower = true,
                "" => {}
                other => return Err(Error::InvalidInstruction(format!("unknown pass `{other}`"))),
            }
        }
        Ok(p)
    }
}

/// Result of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledKernel {
    pub kernel: Kernel,
    /// Emitted by pre-processors, in emission order.
    pub post_processors: Vec<PostProcessor>,
    /// Where each logical qubit ends up after routing.
    pub final_layout: Layout,
}

pub fn run_pipeline(kernel: Kernel, pipeline: &PassPipeline, topology: &Topology, native: &NativeGateSet) -> Result<CompiledKernel> {
    if let Some(Instruction::Call { callee, .. }) = kernel.body.iter().find(|i| matches!(i, Instruction::Call { .. })) {
        return Err(Error::UnresolvedCall(callee.clone()));
    }
    let width = kernel.width();
    if width > topology.qubit_count() {
        return Err(Error::TooWide { width, available: topology.qubit_count() });
    }
    let target = Target { topology: topology.clone(), native: native.clone() };
    let mut layout = Layout::identity(topology.qubit_count());
    let mut post_processors = Vec::new();
    let mut k = kernel;
    for pre in &pipeline.pre_processors {
        let (next, post) = pre.preprocess(k)?;
        k = next;
        post_processors.extend(post);
    }
    for pass in pipeline.optimizers.iter().chain(&pipeline.transformations) {
        k = pass.run(k, &target, &mut layout)?;
    }
    if pipeline.lower {
        k = LowerToNative.run(k, &target, &mut layout)?;
    }
    Ok(CompiledKernel { kernel: k, post_processors, final_layout: layout })
}

fn is_self_inverse(inst: &Instruction) -> bool {
    matches!(inst, Instruction::Gate1 { .. } | Instruction::Gate2 { .. })
}

/// Index of the instruction immediately preceding `j` on every qubit `j`
/// touches, if that is the same instruction for all of them.
fn common_predecessor(last: &BTreeMap<Qubit, usize>, inst: &Instruction) -> Option<usize> {
    let mut prev = None;
    for q in inst.qubits() {
        let p = *last.get(q)?;
        if prev.is_some_and(|x| x != p) {
            return None;
        }
        prev = Some(p);
    }
    prev
}

/// Removes pairs of identical self-inverse gates that are adjacent on every
/// qubit they act on, until none remain.
pub fn cancel_inverse_pairs(kernel: &Kernel) -> Result<Kernel> {
    if let Some(Instruction::Call { callee, .. }) = kernel.body.iter().find(|i| matches!(i, Instruction::Call { .. })) {
        return Err(Error::UnresolvedCall(callee.clone()));
    }
    let mut body = kernel.body.clone();
    'outer: loop {
        let mut last: BTreeMap<Qubit, usize> = BTreeMap::new();
        for (j, inst) in body.iter().enumerate() {
            if is_self_inverse(inst) {
                if let Some(i) = common_predecessor(&last, inst) {
                    // Operand lists must match exactly, so CNOT a b · CNOT b a survives.
                    if body[i] == *inst {
                        body.remove(j);
                        body.remove(i);
                        continue 'outer;
                    }
                }
            }
            for &q in inst.qubits() {
                last.insert(q, j);
            }
        }
        break;
    }
    Ok(Kernel { body, ..kernel.clone() })
}

/// Maps an angle into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle - TAU * libm::floor(angle / TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

fn literal_angle(inst: &Instruction) -> Result<Option<(Axis, f64, Qubit)>> {
    match inst {
        Instruction::Rotation { axis, angle, qubit } => match angle {
            Param::Literal(v) => Ok(Some((*axis, *v, *qubit))),
            other => Err(Error::SymbolicParameter(other.symbol().unwrap_or_default().into())),
        },
        _ => Ok(None),
    }
}

/// Fuses adjacent same-axis rotations on a qubit and drops zero rotations.
pub fn merge_rotations(kernel: &Kernel) -> Result<Kernel> {
    for inst in &kernel.body {
        if let Instruction::Call { callee, .. } = inst {
            return Err(Error::UnresolvedCall(callee.clone()));
        }
        literal_angle(inst)?;
    }
    let mut body: Vec<Instruction> = kernel
        .body
        .iter()
        .filter(|i| !matches!(literal_angle(i), Ok(Some((_, a, _))) if normalize_angle(a).abs() < ZERO_ANGLE_TOL))
        .cloned()
        .collect();
    'outer: loop {
        let mut last: BTreeMap<Qubit, usize> = BTreeMap::new();
        for j in 0..body.len() {
            if let Some((axis, b, q)) = literal_angle(&body[j])? {
                if let Some(&i) = last.get(&q) {
                    if let Some((prev_axis, a, _)) = literal_angle(&body[i])? {
                        if prev_axis == axis {
                            let sum = normalize_angle(a + b);
                            body.remove(j);
                            if sum.abs() < ZERO_ANGLE_TOL {
                                body.remove(i);
                            } else {
                                body[i] = Instruction::Rotation { axis, angle: Param::Literal(sum), qubit: q };
                            }
                            continue 'outer;
                        }
                    }
                }
            }
            for &q in body[j].qubits() {
                last.insert(q, j);
            }
        }
        break;
    }
    Ok(Kernel { body, ..kernel.clone() })
}

/// Greedy shortest-path SWAP insertion. The initial layout is the identity;
/// the returned layout gives each logical qubit's final physical position.
pub fn route_swaps(kernel: &Kernel, topology: &Topology) -> Result<(Kernel, Layout)> {
    let width = kernel.width();
    if width > topology.qubit_count() {
        return Err(Error::TooWide { width, available: topology.qubit_count() });
    }
    let mut layout = Layout::identity(topology.qubit_count());
    let mut body = Vec::with_capacity(kernel.body.len());
    for inst in &kernel.body {
        match inst {
            Instruction::Call { callee, .. } => return Err(Error::UnresolvedCall(callee.clone())),
            Instruction::Gate2 { gate, qubits: [a, b] } => {
                let (pa, pb) = (layout.physical(*a), layout.physical(*b));
                if !topology.is_edge(pa, pb) {
                    let path = topology.shortest_path(pa, pb);
                    // Walk `a` along the path until it neighbours `b`.
                    for w in path[..path.len() - 1].windows(2) {
                        body.push(Instruction::swap(w[0], w[1]));
                        layout.swap_physical(w[0], w[1]);
                    }
                }
                body.push(Instruction::Gate2 { gate: *gate, qubits: [layout.physical(*a), layout.physical(*b)] });
            }
            other => body.push(other.map_qubits(|q| layout.physical(q))),
        }
    }
    Ok((Kernel { body, ..kernel.clone() }, layout))
}

fn lowering_rule(inst: &Instruction) -> Option<Vec<Instruction>> {
    let rz = |a: f64, q| Instruction::rz(a, q);
    let rx = |a: f64, q| Instruction::rx(a, q);
    Some(match inst {
        Instruction::Gate1 { gate, qubit: q } => match gate {
            Gate1::X => vec![rx(PI, *q)],
            Gate1::Z => vec![rz(PI, *q)],
            Gate1::Y => vec![rz(PI, *q), rx(PI, *q)],
            Gate1::H => vec![rz(FRAC_PI_2, *q), rx(FRAC_PI_2, *q), rz(FRAC_PI_2, *q)],
        },
        // Matrix product RZ(π/2)·RX(θ)·RZ(−π/2), so RZ(−π/2) is applied first.
        Instruction::Rotation { axis: Axis::Y, angle, qubit: q } => vec![
            rz(-FRAC_PI_2, *q),
            Instruction::Rotation { axis: Axis::X, angle: angle.clone(), qubit: *q },
            rz(FRAC_PI_2, *q),
        ],
        Instruction::Gate2 { gate: Gate2::Swap, qubits: [a, b] } => {
            vec![Instruction::cnot(*a, *b), Instruction::cnot(*b, *a), Instruction::cnot(*a, *b)]
        }
        _ => return None,
    })
}

/// Rewrites every non-native instruction with exact (up to global phase)
/// decompositions into RX, RZ and CNOT.
pub fn lower_to_native(kernel: &Kernel, native: &NativeGateSet) -> Result<Kernel> {
    let mut body = Vec::with_capacity(kernel.body.len());
    for inst in &kernel.body {
        if native.contains(inst.kind()) {
            body.push(inst.clone());
            continue;
        }
        let replacement = lowering_rule(inst).ok_or(Error::NotLowerable(inst.kind()))?;
        if replacement.iter().any(|r| !native.contains(r.kind())) {
            return Err(Error::NotLowerable(inst.kind()));
        }
        body.extend(replacement);
    }
    Ok(Kernel { body, ..kernel.clone() })
}
