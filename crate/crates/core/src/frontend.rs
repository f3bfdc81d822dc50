//! Recursive-descent parser for `__qpu__` kernel source, and call inlining.
//!
//! ```text
//! program := kernel*
//! kernel  := "__qpu__" IDENT "(" "AcceleratorBuffer" IDENT ("," "double" IDENT)* ")" "{" stmt* "}"
//! stmt    := GATE1 INT | "CNOT" INT INT | "SWAP" INT INT | ROT "(" expr ")" INT
//!          | "MEASURE" INT "[" INT "]" | IDENT "(" IDENT ("," expr)* ")"
//! expr    := ["-"] (NUMBER | IDENT)
//! ```
//!
//! Statements end at a newline or at the closing brace. `#` starts a comment.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result, SourceLocation};
use crate::ir::{Axis, Gate1, Instruction, Kernel, Param, Program};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    Float(f64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Minus,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Float(v) => format!("`{v}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Newline => "newline".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(source: &str) -> Result<Vec<(Tok, SourceLocation)>> {
    let mut out = Vec::new();
    let mut chars = source.char_indices().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    while let Some(&(start, c)) = chars.peek() {
        let loc = SourceLocation::new(line, col);
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '-' => Some(Tok::Minus),
            '\n' => Some(Tok::Newline),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((tok, loc));
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            continue;
        }
        if c == '#' {
            while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                chars.next();
            }
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        let mut end = start;
        if c.is_ascii_alphabetic() || c == '_' {
            while let Some(&(i, c)) = chars.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            let text = &source[start..end];
            col += text.len() as u32;
            out.push((Tok::Ident(text.to_string()), loc));
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut prev = ' ';
            while let Some(&(i, c)) = chars.peek() {
                let exp_sign = (c == '+' || c == '-') && (prev == 'e' || prev == 'E');
                if !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign) {
                    break;
                }
                prev = c;
                end = i + 1;
                chars.next();
            }
            let text = &source[start..end];
            col += text.len() as u32;
            let tok = if text.bytes().all(|b| b.is_ascii_digit()) {
                text.parse().map(Tok::Int).ok()
            } else {
                text.parse().map(Tok::Float).ok()
            };
            let tok = tok.ok_or_else(|| Error::Syntax {
                location: loc,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((tok, loc));
            continue;
        }
        return Err(Error::Syntax { location: loc, message: format!("unexpected character `{c}`") });
    }
    out.push((Tok::Eof, SourceLocation::new(line, col)));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceLocation)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn loc(&self) -> SourceLocation {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            location: self.loc(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(expected)
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(expected),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<()> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            _ => self.error(&format!("`{word}`")),
        }
    }

    fn int(&mut self, expected: &str) -> Result<usize> {
        match self.peek() {
            Tok::Int(i) => {
                let i = *i;
                self.bump();
                Ok(i)
            }
            _ => self.error(expected),
        }
    }

    fn expr(&mut self) -> Result<Param> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let sign = if negate { -1.0 } else { 1.0 };
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Param::Literal(sign * i as f64))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Param::Literal(sign * v))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(if negate { Param::NegSymbol(s) } else { Param::Symbol(s) })
            }
            _ => self.error("a number or parameter name"),
        }
    }

    fn end_of_statement(&mut self) -> Result<()> {
        match self.peek() {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace => Ok(()),
            _ => self.error("end of statement"),
        }
    }

    fn kernel(&mut self) -> Result<(Kernel, Vec<(usize, SourceLocation)>)> {
        self.keyword("__qpu__")?;
        let name = self.ident("kernel name")?;
        self.expect(Tok::LParen, "`(`")?;
        self.keyword("AcceleratorBuffer")?;
        let buffer = self.ident("buffer name")?;
        let mut params = Vec::new();
        while *self.peek() == Tok::Comma {
            self.bump();
            self.keyword("double")?;
            params.push(self.ident("parameter name")?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        self.skip_newlines();
        self.expect(Tok::LBrace, "`{`")?;
        let mut body = Vec::new();
        let mut call_sites = Vec::new();
        loop {
            self.skip_newlines();
            if *self.peek() == Tok::RBrace {
                self.bump();
                break;
            }
            let loc = self.loc();
            let inst = self.statement(&buffer)?;
            if matches!(inst, Instruction::Call { .. }) {
                call_sites.push((body.len(), loc));
            }
            body.push(inst);
            self.end_of_statement()?;
        }
        Ok((Kernel { name, params, body }, call_sites))
    }

    fn statement(&mut self, buffer: &str) -> Result<Instruction> {
        let head = self.ident("an instruction")?;
        let gate1 = match head.as_str() {
            "X" => Some(Gate1::X),
            "Y" => Some(Gate1::Y),
            "Z" => Some(Gate1::Z),
            "H" => Some(Gate1::H),
            _ => None,
        };
        if let Some(gate) = gate1 {
            let qubit = self.int("qubit index")?;
            return Ok(Instruction::Gate1 { gate, qubit });
        }
        let axis = match head.as_str() {
            "RX" => Some(Axis::X),
            "RY" => Some(Axis::Y),
            "RZ" => Some(Axis::Z),
            _ => None,
        };
        if let Some(axis) = axis {
            self.expect(Tok::LParen, "`(`")?;
            let angle = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            let qubit = self.int("qubit index")?;
            return Ok(Instruction::Rotation { axis, angle, qubit });
        }
        match head.as_str() {
            "CNOT" | "SWAP" => {
                let loc = self.loc();
                let a = self.int("first qubit index")?;
                let b = self.int("second qubit index")?;
                if a == b {
                    return Err(Error::Syntax {
                        location: loc,
                        message: format!("{head} operands must be distinct"),
                    });
                }
                Ok(if head == "CNOT" { Instruction::cnot(a, b) } else { Instruction::swap(a, b) })
            }
            "MEASURE" => {
                let qubit = self.int("qubit index")?;
                self.expect(Tok::LBracket, "`[`")?;
                let cbit = self.int("classical bit index")?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Instruction::Measure { qubit, cbit })
            }
            _ => {
                self.expect(Tok::LParen, "`(`")?;
                let loc = self.loc();
                let buf = self.ident("buffer argument")?;
                if buf != buffer {
                    return Err(Error::Syntax {
                        location: loc,
                        message: format!("expected buffer `{buffer}`, found `{buf}`"),
                    });
                }
                let mut args = Vec::new();
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                Ok(Instruction::Call { callee: head, args })
            }
        }
    }
}

/// Parses kernel source into a validated [`Program`].
pub fn parse(source: &str) -> Result<Program> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let mut kernels: Vec<Kernel> = Vec::new();
    let mut sites = Vec::new();
    p.skip_newlines();
    while *p.peek() != Tok::Eof {
        let loc = p.loc();
        let (kernel, calls) = p.kernel()?;
        if kernels.iter().any(|k| k.name == kernel.name) {
            return Err(Error::Syntax {
                location: loc,
                message: format!("duplicate kernel `{}`", kernel.name),
            });
        }
        sites.push(calls);
        kernels.push(kernel);
        p.skip_newlines();
    }
    // Report call-site problems with a location before whole-program validation.
    for (k, calls) in kernels.iter().zip(&sites) {
        for &(idx, location) in calls {
            let Instruction::Call { callee, args } = &k.body[idx] else { continue };
            match kernels.iter().find(|c| &c.name == callee) {
                None => return Err(Error::Syntax { location, message: format!("unknown kernel `{callee}`") }),
                Some(c) if c.params.len() != args.len() => {
                    return Err(Error::Syntax {
                        location,
                        message: format!(
                            "`{callee}` takes {} argument(s), got {}",
                            c.params.len(),
                            args.len()
                        ),
                    })
                }
                _ => {}
            }
        }
    }
    Program::new(kernels)
}

/// Inlines every call reachable from `entry`, returning a call-free kernel
/// that keeps the entry's own parameters.
pub fn resolve_calls(program: &Program, entry: &str) -> Result<Kernel> {
    let kernel = program.get(entry).ok_or_else(|| Error::UnknownKernel(entry.to_string()))?;
    let mut body = Vec::new();
    inline_into(program, kernel, &BTreeMap::new(), &mut body, 0)?;
    let resolved = Kernel { name: kernel.name.clone(), params: kernel.params.clone(), body };
    resolved.validate()?;
    Ok(resolved)
}

fn inline_into(
    program: &Program,
    kernel: &Kernel,
    args: &BTreeMap<&str, &Param>,
    out: &mut Vec<Instruction>,
    depth: usize,
) -> Result<()> {
    if depth > program.len() {
        return Err(Error::CyclicCall(kernel.name.clone()));
    }
    for inst in &kernel.body {
        match inst {
            Instruction::Call { callee, args: call_args } => {
                let target = program.get(callee).ok_or_else(|| Error::UnknownKernel(callee.clone()))?;
                if target.params.len() != call_args.len() {
                    return Err(Error::ArityMismatch {
                        callee: callee.clone(),
                        expected: target.params.len(),
                        found: call_args.len(),
                    });
                }
                let actual: Vec<Param> = call_args.iter().map(|a| a.substitute(args)).collect();
                let scope = target.params.iter().map(String::as_str).zip(actual.iter()).collect();
                inline_into(program, target, &scope, out, depth + 1)?;
            }
            Instruction::Rotation { axis, angle, qubit } => out.push(Instruction::Rotation {
                axis: *axis,
                angle: angle.substitute(args),
                qubit: *qubit,
            }),
            other => out.push(other.clone()),
        }
    }
    Ok(())
}
