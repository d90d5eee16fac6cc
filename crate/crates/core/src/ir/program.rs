use std::collections::{HashMap, HashSet};
use std::fmt;

use super::value::{format_float, Intrinsic, OperandKind, Predicate};
use super::Opcode;

/// Static source operand.
#[derive(Debug, Clone)]
pub enum Operand {
    Reg(String),
    Addr(u32),
    Int(i32),
    Float(f64),
    Label(String),
}

impl PartialEq for Operand {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Operand::Reg(a), Operand::Reg(b)) | (Operand::Label(a), Operand::Label(b)) => a == b,
            (Operand::Addr(a), Operand::Addr(b)) => a == b,
            (Operand::Int(a), Operand::Int(b)) => a == b,
            (Operand::Float(a), Operand::Float(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(name) => write!(f, "%{name}"),
            Operand::Addr(a) => write!(f, "@{a}"),
            Operand::Int(v) => write!(f, "{v}"),
            Operand::Float(v) => f.write_str(&format_float(*v)),
            Operand::Label(l) => write!(f, "${l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub dest: Option<String>,
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
}

impl Instruction {
    pub fn new(dest: Option<&str>, opcode: Opcode, operands: Vec<Operand>) -> Self {
        Instruction {
            dest: dest.map(str::to_string),
            opcode,
            operands,
        }
    }

    /// Registers read by this instruction.
    pub fn uses(&self) -> impl Iterator<Item = &str> {
        self.operands.iter().filter_map(|o| match o {
            Operand::Reg(r) => Some(r.as_str()),
            _ => None,
        })
    }

    /// Block labels this instruction may transfer control to (or, for `phi`,
    /// names as a predecessor).
    pub fn block_refs(&self) -> impl Iterator<Item = &str> {
        let refers = matches!(self.opcode, Opcode::Br | Opcode::BrCond | Opcode::Phi);
        self.operands.iter().filter_map(move |o| match o {
            Operand::Label(l) if refers => Some(l.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(d) = &self.dest {
            write!(f, "%{d} = ")?;
        }
        f.write_str(self.opcode.name())?;
        for (i, op) in self.operands.iter().enumerate() {
            f.write_str(if i == 0 { " " } else { ", " })?;
            write!(f, "{op}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub label: String,
    pub instructions: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub kind: OperandKind,
}

/// A mini-IR program. The first block is the entry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub inputs: Vec<Decl>,
    pub outputs: Vec<Decl>,
    /// Loop-header block labels; entering one opens a new trace chunk.
    pub loops: Vec<String>,
    pub blocks: Vec<Block>,
}

impl Program {
    pub fn entry(&self) -> Option<&str> {
        self.blocks.first().map(|b| b.label.as_str())
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    pub fn instruction_count(&self) -> usize {
        self.blocks.iter().map(|b| b.instructions.len()).sum()
    }

    /// Control-flow successors of block `i`.
    pub fn successors(&self, i: usize) -> Vec<usize> {
        let block = &self.blocks[i];
        match block
            .instructions
            .iter()
            .find(|ins| ins.opcode.is_terminator())
        {
            Some(term) if term.opcode == Opcode::Halt => Vec::new(),
            Some(term) => {
                let mut out = Vec::new();
                for l in term.block_refs() {
                    if let Some(j) = self.block_index(l) {
                        if !out.contains(&j) {
                            out.push(j);
                        }
                    }
                }
                out
            }
            None if i + 1 < self.blocks.len() => vec![i + 1],
            None => Vec::new(),
        }
    }

    /// Blocks that lie on a cycle through `header` (reachable from it and
    /// reaching back to it), including `header` itself.
    pub fn loop_body(&self, header: usize) -> HashSet<usize> {
        let forward = self.reachable_from(header);
        forward
            .into_iter()
            .filter(|&b| b == header || self.reachable_from(b).contains(&header))
            .collect()
    }

    fn reachable_from(&self, start: usize) -> HashSet<usize> {
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        while let Some(b) = stack.pop() {
            for s in self.successors(b) {
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        seen.insert(start);
        seen
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.inputs {
            writeln!(f, ".input %{} {}", d.name, d.kind)?;
        }
        for d in &self.outputs {
            writeln!(f, ".output %{} {}", d.name, d.kind)?;
        }
        for l in &self.loops {
            writeln!(f, ".loop {l}")?;
        }
        for b in &self.blocks {
            writeln!(f, "{}:", b.label)?;
            for ins in &b.instructions {
                writeln!(f, "  {ins}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("duplicate block label `{0}`")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

struct LineCtx<'a> {
    line_no: usize,
    raw: &'a str,
}

impl LineCtx<'_> {
    fn col_of(&self, token: &str) -> usize {
        let base = self.raw.as_ptr() as usize;
        let at = token.as_ptr() as usize;
        if at >= base && at <= base + self.raw.len() {
            at - base + 1
        } else {
            1
        }
    }

    fn err(&self, token: &str, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line_no,
            col: self.col_of(token),
            kind: ParseErrorKind::Syntax(msg.into()),
        }
    }
}

fn parse_reg<'a>(ctx: &LineCtx, tok: &'a str) -> Result<&'a str, ParseError> {
    match tok.strip_prefix('%') {
        Some(name) if is_ident(name) => Ok(name),
        _ => Err(ctx.err(tok, format!("expected register, found `{tok}`"))),
    }
}

fn parse_operand(ctx: &LineCtx, tok: &str) -> Result<Operand, ParseError> {
    if tok.starts_with('%') {
        return parse_reg(ctx, tok).map(|r| Operand::Reg(r.to_string()));
    }
    if let Some(l) = tok.strip_prefix('$') {
        if is_ident(l) {
            return Ok(Operand::Label(l.to_string()));
        }
        return Err(ctx.err(tok, format!("bad label `{tok}`")));
    }
    if let Some(a) = tok.strip_prefix('@') {
        return a
            .parse::<u32>()
            .map(Operand::Addr)
            .map_err(|_| ctx.err(tok, format!("bad address literal `{tok}`")));
    }
    let numeric = tok
        .strip_prefix('-')
        .unwrap_or(tok)
        .starts_with(|c: char| c.is_ascii_digit());
    if numeric && tok.contains('.') {
        return tok
            .parse::<f64>()
            .map(Operand::Float)
            .map_err(|_| ctx.err(tok, format!("bad float literal `{tok}`")));
    }
    if numeric {
        return tok
            .parse::<i32>()
            .map(Operand::Int)
            .map_err(|_| ctx.err(tok, format!("bad integer literal `{tok}`")));
    }
    Err(ctx.err(tok, format!("unrecognized operand `{tok}`")))
}

fn parse_instruction(ctx: &LineCtx, text: &str) -> Result<Instruction, ParseError> {
    let (dest, rest) = match text.split_once('=') {
        Some((lhs, rhs)) => (Some(parse_reg(ctx, lhs.trim())?), rhs.trim_start()),
        None => (None, text),
    };
    let (op_tok, args) = match rest.find(char::is_whitespace) {
        Some(pos) => (&rest[..pos], rest[pos..].trim()),
        None => (rest, ""),
    };
    let opcode = Opcode::from_name(op_tok)
        .ok_or_else(|| ctx.err(op_tok, format!("unknown opcode `{op_tok}`")))?;
    let shape = opcode.shape();
    if shape.has_dest != dest.is_some() {
        let msg = if shape.has_dest {
            format!("`{opcode}` needs a destination register")
        } else {
            format!("`{opcode}` does not produce a value")
        };
        return Err(ctx.err(op_tok, msg));
    }
    let mut operands = Vec::new();
    if !args.is_empty() {
        for tok in args.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                return Err(ctx.err(args, "empty operand"));
            }
            operands.push((tok, parse_operand(ctx, tok)?));
        }
    }
    if operands.len() != shape.label_slots.len() {
        return Err(ctx.err(
            op_tok,
            format!(
                "`{opcode}` takes {} operand(s), found {}",
                shape.label_slots.len(),
                operands.len()
            ),
        ));
    }
    for ((tok, op), &want_label) in operands.iter().zip(shape.label_slots) {
        let is_label = matches!(op, Operand::Label(_));
        if is_label != want_label {
            let msg = if want_label {
                format!("expected a `$label`, found `{tok}`")
            } else {
                format!("label `{tok}` not allowed here")
            };
            return Err(ctx.err(tok, msg));
        }
        if let Operand::Label(l) = op {
            let known = match opcode {
                Opcode::Icmp => Predicate::from_name(l).is_some_and(|p| !p.is_float()),
                Opcode::Fcmp => Predicate::from_name(l).is_some_and(|p| p.is_float()),
                Opcode::Call => Intrinsic::from_name(l).is_some(),
                _ => true,
            };
            if !known {
                return Err(ctx.err(tok, format!("unknown {opcode} selector `{tok}`")));
            }
        }
    }
    Ok(Instruction {
        dest: dest.map(str::to_string),
        opcode,
        operands: operands.into_iter().map(|(_, o)| o).collect(),
    })
}

fn parse_decl(ctx: &LineCtx, args: &[&str], directive: &str) -> Result<Decl, ParseError> {
    match args {
        [name, kind] => {
            let name = parse_reg(ctx, name)?;
            let kind = kind
                .parse::<OperandKind>()
                .ok()
                .filter(|k| *k != OperandKind::Label)
                .ok_or_else(|| ctx.err(kind, format!("bad kind `{kind}`")))?;
            Ok(Decl {
                name: name.to_string(),
                kind,
            })
        }
        _ => Err(ctx.err(ctx.raw.trim(), format!("usage: {directive} %name kind"))),
    }
}

/// Parses program text.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut program = Program::default();
    let mut seen_labels: HashMap<String, (usize, usize)> = HashMap::new();
    // (label, line, col) of every reference that must resolve to a block.
    let mut refs: Vec<(String, usize, usize)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx {
            line_no: idx + 1,
            raw,
        };
        let code = raw.split(';').next().unwrap_or("").trim();
        if code.is_empty() {
            continue;
        }
        if let Some(directive) = code.strip_prefix('.') {
            let parts: Vec<&str> = directive.split_whitespace().collect();
            match parts.split_first() {
                Some((&"input", args)) => program.inputs.push(parse_decl(&ctx, args, ".input")?),
                Some((&"output", args)) => program.outputs.push(parse_decl(&ctx, args, ".output")?),
                Some((&"loop", [label])) => {
                    let l = label.strip_prefix('$').unwrap_or(label);
                    if !is_ident(l) {
                        return Err(ctx.err(label, format!("bad label `{label}`")));
                    }
                    refs.push((l.to_string(), ctx.line_no, ctx.col_of(label)));
                    program.loops.push(l.to_string());
                }
                _ => return Err(ctx.err(code, format!("unknown directive `{code}`"))),
            }
            continue;
        }
        let mut rest = code;
        if let Some((head, tail)) = code.split_once(':') {
            if is_ident(head.trim()) {
                let label = head.trim();
                if seen_labels.contains_key(label) {
                    return Err(ParseError {
                        line: ctx.line_no,
                        col: ctx.col_of(head),
                        kind: ParseErrorKind::DuplicateLabel(label.to_string()),
                    });
                }
                seen_labels.insert(label.to_string(), (ctx.line_no, ctx.col_of(head)));
                program.blocks.push(Block {
                    label: label.to_string(),
                    instructions: Vec::new(),
                });
                rest = tail.trim();
                if rest.is_empty() {
                    continue;
                }
            }
        }
        let ins = parse_instruction(&ctx, rest)?;
        for l in ins.block_refs() {
            let tok_col = raw.find(&format!("${l}")).map_or(1, |p| p + 1);
            refs.push((l.to_string(), ctx.line_no, tok_col));
        }
        match program.blocks.last_mut() {
            Some(block) => block.instructions.push(ins),
            None => return Err(ctx.err(rest, "instruction outside of a block")),
        }
    }

    for (label, line, col) in refs {
        if !seen_labels.contains_key(&label) {
            return Err(ParseError {
                line,
                col,
                kind: ParseErrorKind::UndefinedLabel(label),
            });
        }
    }
    if program.blocks.is_empty() {
        return Err(ParseError {
            line: 1,
            col: 1,
            kind: ParseErrorKind::Syntax("program has no blocks".into()),
        });
    }
    Ok(program)
}
