use std::io::{self, BufRead, Write};

use super::{Aux, Chunk, InstructionRecord, OperandRecord, Role, Trace};
use crate::ir::{Opcode, OperandKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceErrorKind {
    #[error("empty trace")]
    Empty,
    #[error("record outside chunk")]
    RecordOutsideChunk,
    #[error("bad opcode name `{0}`")]
    BadOpcode(String),
    #[error("width/kind mismatch: {kind} operand with width {width}")]
    WidthKindMismatch { kind: String, width: u32 },
    #[error("non-monotone seq {seq} after {previous}")]
    NonMonotoneSeq { previous: u64, seq: u64 },
    #[error("expected #CHUNK {expected}, found #CHUNK {found}")]
    ChunkId { expected: usize, found: usize },
    #[error("empty chunk {0}")]
    EmptyChunk(usize),
    #[error("operand count does not match `{0}`")]
    Arity(Opcode),
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {kind}")]
pub struct TraceError {
    pub line: usize,
    pub kind: TraceErrorKind,
}

fn write_record<W: Write>(rec: &InstructionRecord, w: &mut W) -> io::Result<()> {
    write!(w, "{}\t{}", rec.seq, rec.opcode)?;
    for op in &rec.operands {
        let digits = op.width.div_ceil(4) as usize;
        write!(
            w,
            "\t{}:{}:{}:{}:{:0digits$x}",
            op.role.tag(),
            op.name,
            op.kind,
            op.width,
            op.value,
        )?;
    }
    let aux = &rec.aux;
    for (key, v) in [
        ("shamt", aux.shamt),
        ("srcw", aux.srcw),
        ("dstw", aux.dstw),
        ("pred", aux.pred),
    ] {
        if let Some(v) = v {
            write!(w, "\taux={key}={v}")?;
        }
    }
    writeln!(w)
}

/// Writes the canonical text form of a trace.
pub fn write_trace<W: Write>(trace: &Trace, w: &mut W) -> io::Result<()> {
    write!(w, "#OUTPUTS")?;
    for o in &trace.outputs {
        write!(w, " {o}")?;
    }
    writeln!(w)?;
    for chunk in &trace.chunks {
        writeln!(w, "#CHUNK {}", chunk.id)?;
        for rec in &chunk.records {
            write_record(rec, w)?;
        }
    }
    Ok(())
}

/// Streaming trace parser yielding one chunk at a time.
///
/// Only the chunk being assembled is held in memory.
pub struct TraceReader<R> {
    input: R,
    line_no: usize,
    pending: Option<String>,
    outputs: Vec<String>,
    current: Option<Chunk>,
    next_id: usize,
    last_seq: Option<u64>,
    chunks_seen: usize,
    high_water: usize,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    /// Reads the optional `#OUTPUTS` header.
    pub fn new(input: R) -> Result<Self, TraceError> {
        let mut reader = TraceReader {
            input,
            line_no: 0,
            pending: None,
            outputs: Vec::new(),
            current: None,
            next_id: 0,
            last_seq: None,
            chunks_seen: 0,
            high_water: 0,
            done: false,
        };
        if let Some(first) = reader.read_line()? {
            match first.strip_prefix("#OUTPUTS") {
                Some(rest) if rest.is_empty() || rest.starts_with(' ') => {
                    reader.outputs = rest.split_whitespace().map(str::to_string).collect();
                }
                _ => reader.pending = Some(first),
            }
        }
        Ok(reader)
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Largest number of records held at once so far.
    pub fn high_water(&self) -> usize {
        self.high_water
    }

    fn err(&self, kind: TraceErrorKind) -> TraceError {
        TraceError {
            line: self.line_no,
            kind,
        }
    }

    fn read_line(&mut self) -> Result<Option<String>, TraceError> {
        if let Some(l) = self.pending.take() {
            return Ok(Some(l));
        }
        let mut buf = String::new();
        let n = self
            .input
            .read_line(&mut buf)
            .map_err(|e| self.err(TraceErrorKind::Io(e.to_string())))?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        while buf.ends_with('\n') || buf.ends_with('\r') {
            buf.pop();
        }
        Ok(Some(buf))
    }

    fn finish_current(&mut self) -> Result<Option<Chunk>, TraceError> {
        match self.current.take() {
            Some(c) if c.records.is_empty() => Err(self.err(TraceErrorKind::EmptyChunk(c.id))),
            other => Ok(other),
        }
    }

    fn next_chunk(&mut self) -> Result<Option<Chunk>, TraceError> {
        loop {
            let Some(line) = self.read_line()? else {
                let last = self.finish_current()?;
                if last.is_none() && self.chunks_seen == 0 {
                    return Err(self.err(TraceErrorKind::Empty));
                }
                return Ok(last);
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#CHUNK ") {
                let id: usize = rest
                    .parse()
                    .map_err(|_| self.err(TraceErrorKind::Malformed(line.clone())))?;
                if id != self.next_id {
                    return Err(self.err(TraceErrorKind::ChunkId {
                        expected: self.next_id,
                        found: id,
                    }));
                }
                self.next_id += 1;
                self.chunks_seen += 1;
                let finished = self.finish_current()?;
                self.current = Some(Chunk {
                    id,
                    records: Vec::new(),
                });
                if finished.is_some() {
                    return Ok(finished);
                }
                continue;
            }
            if line.starts_with('#') {
                return Err(self.err(TraceErrorKind::Malformed(line)));
            }
            if self.current.is_none() {
                return Err(self.err(TraceErrorKind::RecordOutsideChunk));
            }
            let rec = self.parse_record(&line)?;
            if let Some(prev) = self.last_seq {
                if rec.seq <= prev {
                    return Err(self.err(TraceErrorKind::NonMonotoneSeq {
                        previous: prev,
                        seq: rec.seq,
                    }));
                }
            }
            self.last_seq = Some(rec.seq);
            let current = self.current.as_mut().expect("checked above");
            current.records.push(rec);
            self.high_water = self.high_water.max(current.records.len());
        }
    }

    fn parse_record(&self, line: &str) -> Result<InstructionRecord, TraceError> {
        let malformed = |what: &str| self.err(TraceErrorKind::Malformed(what.to_string()));
        let mut fields = line.split('\t');
        let seq = fields
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| malformed(line))?;
        let op_name = fields.next().ok_or_else(|| malformed(line))?;
        let opcode = Opcode::from_name(op_name)
            .ok_or_else(|| self.err(TraceErrorKind::BadOpcode(op_name.to_string())))?;
        let mut operands = Vec::new();
        let mut aux = Aux::default();
        let mut in_aux = false;
        for field in fields {
            if let Some(kv) = field.strip_prefix("aux=") {
                in_aux = true;
                let (key, v) = kv.split_once('=').ok_or_else(|| malformed(field))?;
                let v: u32 = v.parse().map_err(|_| malformed(field))?;
                let slot = match key {
                    "shamt" => &mut aux.shamt,
                    "srcw" => &mut aux.srcw,
                    "dstw" => &mut aux.dstw,
                    "pred" => &mut aux.pred,
                    _ => return Err(malformed(field)),
                };
                if slot.replace(v).is_some() {
                    return Err(malformed(field));
                }
                continue;
            }
            if in_aux {
                return Err(malformed(field));
            }
            let parts: Vec<&str> = field.split(':').collect();
            let [role, name, kind, width, hex] = parts[..] else {
                return Err(malformed(field));
            };
            let role = match role {
                "in" => Role::Input,
                "out" => Role::Output,
                _ => return Err(malformed(field)),
            };
            let kind: OperandKind = kind.parse().map_err(|_| malformed(field))?;
            let width: u32 = width.parse().map_err(|_| malformed(field))?;
            if kind == OperandKind::Label || width != kind.bit_width() {
                return Err(self.err(TraceErrorKind::WidthKindMismatch {
                    kind: kind.to_string(),
                    width,
                }));
            }
            if name.is_empty() || hex.len() != width.div_ceil(4) as usize {
                return Err(malformed(field));
            }
            let value = u64::from_str_radix(hex, 16).map_err(|_| malformed(field))?;
            if width < 64 && value >> width != 0 {
                return Err(malformed(field));
            }
            operands.push(OperandRecord {
                name: name.to_string(),
                kind,
                width,
                value,
                role,
            });
        }
        let n_in = operands
            .iter()
            .take_while(|o| o.role == Role::Input)
            .count();
        let n_out = operands.len() - n_in;
        if (n_in, n_out) != opcode.trace_arity()
            || operands[n_in..].iter().any(|o| o.role != Role::Output)
        {
            return Err(self.err(TraceErrorKind::Arity(opcode)));
        }
        Ok(InstructionRecord {
            seq,
            opcode,
            operands,
            aux,
        })
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Chunk, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_chunk() {
            Ok(Some(c)) => Some(Ok(c)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Parses a whole trace stream.
pub fn parse_trace<R: BufRead>(input: R) -> Result<Trace, TraceError> {
    let mut reader = TraceReader::new(input)?;
    let mut chunks = Vec::new();
    for chunk in reader.by_ref() {
        chunks.push(chunk?);
    }
    Ok(Trace {
        chunks,
        outputs: reader.outputs,
    })
}
