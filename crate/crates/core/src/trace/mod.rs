//! Dynamic instruction traces.
//!
//! A trace is the ordered list of executed instruction instances with the
//! bit patterns of every operand, partitioned into chunks at loop
//! boundaries. Registers are named `%name`, memory cells `@` followed by
//! their 8-digit hex address, and immediates `#` followed by the literal.

mod format;

pub use format::{parse_trace, write_trace, TraceError, TraceErrorKind, TraceReader};

use crate::ir::Opcode;
use crate::ir::{OperandKind, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Input,
    Output,
}

impl Role {
    pub fn tag(self) -> &'static str {
        match self {
            Role::Input => "in",
            Role::Output => "out",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OperandRecord {
    pub name: String,
    pub kind: OperandKind,
    pub width: u32,
    /// Raw bit pattern, only the low `width` bits are meaningful.
    pub value: u64,
    pub role: Role,
}

impl OperandRecord {
    pub fn new(name: impl Into<String>, value: Value, role: Role) -> Self {
        OperandRecord {
            name: name.into(),
            kind: value.kind(),
            width: value.width(),
            value: value.bits(),
            role,
        }
    }

    pub fn value(&self) -> Option<Value> {
        Value::from_bits(self.kind, self.value)
    }

    /// Registers and memory cells are locations; immediates are not.
    pub fn is_location(&self) -> bool {
        self.name.starts_with('%') || self.name.starts_with('@')
    }
}

/// Name of the memory cell at `addr`.
pub fn memory_location(addr: u32) -> String {
    format!("@{addr:08x}")
}

/// Opcode-specific payload carried by a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Aux {
    pub shamt: Option<u32>,
    pub srcw: Option<u32>,
    pub dstw: Option<u32>,
    /// Comparison predicate code of `icmp` / `fcmp`.
    pub pred: Option<u32>,
}

impl Aux {
    pub fn is_empty(&self) -> bool {
        *self == Aux::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstructionRecord {
    pub seq: u64,
    pub opcode: Opcode,
    /// Inputs first, then at most one output.
    pub operands: Vec<OperandRecord>,
    pub aux: Aux,
}

impl InstructionRecord {
    pub fn inputs(&self) -> impl Iterator<Item = &OperandRecord> {
        self.operands.iter().filter(|o| o.role == Role::Input)
    }

    pub fn output(&self) -> Option<&OperandRecord> {
        self.operands.iter().find(|o| o.role == Role::Output)
    }

    pub fn total_bits(&self) -> u32 {
        self.operands.iter().map(|o| o.width).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub id: usize,
    pub records: Vec<InstructionRecord>,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub chunks: Vec<Chunk>,
    /// Locations that are live when the program exits.
    pub outputs: Vec<String>,
}

impl Trace {
    pub fn records(&self) -> impl Iterator<Item = &InstructionRecord> {
        self.chunks.iter().flat_map(|c| c.records.iter())
    }

    pub fn record_count(&self) -> usize {
        self.chunks.iter().map(Chunk::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.record_count() == 0
    }

    pub fn record(&self, dyn_index: usize) -> Option<&InstructionRecord> {
        let mut rest = dyn_index;
        for c in &self.chunks {
            if rest < c.len() {
                return Some(&c.records[rest]);
            }
            rest -= c.len();
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        write_trace(self, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace text is UTF-8")
    }
}

/// Splits `records` at the given record positions.
///
/// Delimiters must be strictly increasing and at most `records.len()`.
/// Segments that would be empty are dropped and the remaining chunks are
/// numbered consecutively from 0.
pub fn split_chunks(records: Vec<InstructionRecord>, delimiters: &[usize]) -> Vec<Chunk> {
    assert!(
        delimiters.windows(2).all(|w| w[0] < w[1]),
        "chunk delimiters must be strictly increasing"
    );
    assert!(
        delimiters.last().is_none_or(|&d| d <= records.len()),
        "chunk delimiter out of range"
    );
    let mut chunks = Vec::new();
    let mut bounds = delimiters.to_vec();
    bounds.push(records.len());
    let mut iter = records.into_iter();
    let mut start = 0;
    for end in bounds {
        let segment: Vec<_> = iter.by_ref().take(end - start).collect();
        start = end;
        if !segment.is_empty() {
            chunks.push(Chunk {
                id: chunks.len(),
                records: segment,
            });
        }
    }
    chunks
}
