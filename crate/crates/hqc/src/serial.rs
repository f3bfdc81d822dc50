//! On-disk JSON form of a [`Program`].
//!
//! ```json
//! {"kernels": [{"name": "z0", "params": ["t0"], "instructions": [
//!     {"op": "CALL", "qubits": [], "callee": "ansatz", "args": ["t0"]},
//!     {"op": "MEASURE", "qubits": [0], "cbit": 0}]}]}
//! ```
//!
//! Literal parameters are JSON numbers; symbols are strings, with a leading
//! `-` for a negated symbol. Keys are emitted in a fixed order so documents
//! are byte-stable.

use hqc_core::ir::{Axis, Gate1, Gate2, Instruction, Kernel, OpKind, Param, Program};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProgramDoc {
    kernels: Vec<KernelDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelDoc {
    name: String,
    #[serde(default)]
    params: Vec<String>,
    instructions: Vec<InstructionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionDoc {
    op: String,
    #[serde(default)]
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<ParamDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cbit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    callee: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    args: Option<Vec<ParamDoc>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ParamDoc {
    Number(f64),
    Symbol(String),
}

impl From<&Param> for ParamDoc {
    fn from(p: &Param) -> Self {
        match p {
            Param::Literal(v) => ParamDoc::Number(*v),
            Param::Symbol(_) | Param::NegSymbol(_) => ParamDoc::Symbol(p.to_string()),
        }
    }
}

impl ParamDoc {
    fn into_param(self) -> Result<Param> {
        match self {
            ParamDoc::Number(v) => Ok(Param::Literal(v)),
            ParamDoc::Symbol(s) => {
                let name = s.strip_prefix('-').unwrap_or(&s);
                let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    return Err(invalid(format!("`{s}` is not a number or parameter name")));
                }
                Ok(Param::from(s.as_str()))
            }
        }
    }
}

fn invalid(message: String) -> Error {
    Error::Config { what: "program document", message }
}

fn instruction_doc(inst: &Instruction) -> InstructionDoc {
    let mut doc = InstructionDoc {
        op: inst.kind().mnemonic().to_string(),
        qubits: inst.qubits().to_vec(),
        param: inst.param().map(ParamDoc::from),
        cbit: None,
        callee: None,
        args: None,
    };
    match inst {
        Instruction::Measure { cbit, .. } => doc.cbit = Some(*cbit),
        Instruction::Call { callee, args } => {
            doc.callee = Some(callee.clone());
            doc.args = Some(args.iter().map(ParamDoc::from).collect());
        }
        _ => {}
    }
    doc
}

fn instruction(doc: InstructionDoc, kernel: &str, index: usize) -> Result<Instruction> {
    let here = || format!("kernel `{kernel}` instruction {index}");
    let kind = OpKind::from_mnemonic(&doc.op).ok_or_else(|| invalid(format!("{}: unknown op `{}`", here(), doc.op)))?;
    let qubits = |n: usize| -> Result<&[usize]> {
        if doc.qubits.len() == n {
            Ok(&doc.qubits)
        } else {
            Err(invalid(format!("{}: {} takes {n} qubit(s), found {}", here(), doc.op, doc.qubits.len())))
        }
    };
    let unexpected = |field: &str, present: bool| -> Result<()> {
        if present {
            Err(invalid(format!("{}: {} does not take `{field}`", here(), doc.op)))
        } else {
            Ok(())
        }
    };
    let rotation = matches!(kind, OpKind::Rx | OpKind::Ry | OpKind::Rz);
    unexpected("param", doc.param.is_some() && !rotation)?;
    unexpected("cbit", doc.cbit.is_some() && kind != OpKind::Measure)?;
    unexpected("callee", doc.callee.is_some() && kind != OpKind::Call)?;
    unexpected("args", doc.args.is_some() && kind != OpKind::Call)?;

    let gate1 = |g: Gate1| -> Result<Instruction> { Ok(Instruction::Gate1 { gate: g, qubit: qubits(1)?[0] }) };
    let gate2 = |g: Gate2| -> Result<Instruction> {
        let q = qubits(2)?;
        Ok(Instruction::Gate2 { gate: g, qubits: [q[0], q[1]] })
    };
    let rot = |axis: Axis| -> Result<Instruction> {
        let angle = doc.param.clone().ok_or_else(|| invalid(format!("{}: {} needs `param`", here(), doc.op)))?.into_param()?;
        Ok(Instruction::Rotation { axis, angle, qubit: qubits(1)?[0] })
    };
    match kind {
        OpKind::X => gate1(Gate1::X),
        OpKind::Y => gate1(Gate1::Y),
        OpKind::Z => gate1(Gate1::Z),
        OpKind::H => gate1(Gate1::H),
        OpKind::Rx => rot(Axis::X),
        OpKind::Ry => rot(Axis::Y),
        OpKind::Rz => rot(Axis::Z),
        OpKind::Cnot => gate2(Gate2::Cnot),
        OpKind::Swap => gate2(Gate2::Swap),
        OpKind::Measure => {
            let cbit = doc.cbit.ok_or_else(|| invalid(format!("{}: MEASURE needs `cbit`", here())))?;
            Ok(Instruction::Measure { qubit: qubits(1)?[0], cbit })
        }
        OpKind::Call => {
            qubits(0)?;
            let callee = doc.callee.clone().ok_or_else(|| invalid(format!("{}: CALL needs `callee`", here())))?;
            let args = doc.args.clone().unwrap_or_default().into_iter().map(ParamDoc::into_param).collect::<Result<_>>()?;
            Ok(Instruction::Call { callee, args })
        }
    }
}

/// Pretty-printed JSON document for `program`.
pub fn to_json(program: &Program) -> String {
    let doc = ProgramDoc {
        kernels: program
            .kernels()
            .iter()
            .map(|k| KernelDoc {
                name: k.name.clone(),
                params: k.params.clone(),
                instructions: k.body.iter().map(instruction_doc).collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("program documents always serialize");
    text.push('\n');
    text
}

/// Parses and validates a JSON program document.
pub fn from_json(text: &str) -> Result<Program> {
    let doc: ProgramDoc = serde_json::from_str(text).map_err(|e| Error::json("program document", &e))?;
    let kernels = doc
        .kernels
        .into_iter()
        .map(|k| {
            let body = k
                .instructions
                .into_iter()
                .enumerate()
                .map(|(i, d)| instruction(d, &k.name, i))
                .collect::<Result<Vec<_>>>()?;
            Ok(Kernel::new(k.name, k.params, body))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Program::new(kernels)?)
}
