//! Core of a hardware-agnostic quantum compilation and execution stack.
//!
//! Everything here is `no_std` (with `alloc`): the kernel IR and its
//! assembly and DAG forms, the kernel-language parser, compiler passes,
//! a state-vector accelerator with shot sampling and readout noise,
//! readout-error mitigation and the variational eigensolver driver.
//! File formats, the job-queue service and the CLI live in the `hqc` crate.
//!
//! Conventions used throughout:
//!
//! * qubit 0 is the least-significant bit of a state index;
//! * measured bitstrings render the highest classical position first;
//! * `RX(θ) = exp(-iθX/2)` and likewise for `RY`/`RZ`; `CNOT a b` has
//!   control `a`.

#![no_std]

extern crate alloc;

pub mod accel;
pub mod dag;
pub mod error;
pub mod frontend;
pub mod ir;
pub mod mitigation;
pub mod optim;
pub mod passes;
pub mod pauli;
pub mod vqe;

pub use accel::{Accelerator, AcceleratorBuffer, LocalSimulator, NoiseModel, ReadoutError, StateVector};
pub use dag::CircuitDag;
pub use error::{Error, Result, SourceLocation};
pub use frontend::{parse, resolve_calls};
pub use ir::{Axis, Gate1, Gate2, Instruction, Kernel, OpKind, Param, Program};
pub use pauli::{Pauli, PauliString};
