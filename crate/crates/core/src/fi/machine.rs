use std::collections::{BTreeMap, HashMap};

use crate::ir::{
    compute, format_float, shift_amount, truncation_widths, validate_program, Intrinsic, Modifier,
    Opcode, Operand, OperandKind, Predicate, Program, Trap, ValidationReport, Value,
};
use crate::trace::{
    memory_location, split_chunks, Aux, InstructionRecord, OperandRecord, Role, Trace,
};

use super::InjectionPoint;

/// Number of addressable memory cells. Pointers at or above this trap.
pub const MEMORY_CELLS: u32 = 4096;

/// Values bound to a program's declared inputs, keyed by register name
/// (without the `%`).
pub type Bindings = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("program is invalid: {0}")]
    InvalidProgram(ValidationReport),
    #[error("unbound input %{0}")]
    UnboundInput(String),
    #[error("input %{name} declared {expected}, bound to a {found} value")]
    InputKind {
        name: String,
        expected: OperandKind,
        found: OperandKind,
    },
    #[error("bad input binding on line {line}: {message}")]
    BadBinding { line: usize, message: String },
}

/// Parses input bindings, one `%name = literal` per line. Literals are
/// decimal integers, floats (with a `.`) or `@addr` pointers; `;` starts a
/// comment.
pub fn parse_bindings(text: &str) -> Result<Bindings, ExecError> {
    let mut out = Bindings::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| ExecError::BadBinding {
            line: i + 1,
            message,
        };
        let (name, lit) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("expected `%name = value`, found `{line}`")))?;
        let name = name
            .trim()
            .strip_prefix('%')
            .ok_or_else(|| bad(format!("expected a register name, found `{}`", name.trim())))?;
        let lit = lit.trim();
        let value = if let Some(a) = lit.strip_prefix('@') {
            a.parse::<u32>().map(Value::Ptr).ok()
        } else if lit.contains('.') {
            lit.parse::<f64>().ok().map(Value::float)
        } else {
            lit.parse::<i32>().ok().map(Value::int)
        };
        let value = value.ok_or_else(|| bad(format!("bad literal `{lit}`")))?;
        if out.insert(name.to_string(), value).is_some() {
            return Err(bad(format!("%{name} bound twice")));
        }
    }
    Ok(out)
}

/// Renders bindings in the format read by [`parse_bindings`].
pub fn format_bindings(bindings: &Bindings) -> String {
    bindings
        .iter()
        .map(|(k, v)| format!("%{k} = {v}\n"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Completed,
    Trapped(Trap),
    Hung,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub status: Status,
    /// Values emitted by `output`, in order. Empty unless completed.
    pub outputs: Vec<Value>,
    /// Dynamic instructions executed.
    pub steps: u64,
    pub trace: Option<Trace>,
}

#[derive(Debug, Clone)]
enum Src {
    Reg(usize),
    Imm(Value, String),
}

#[derive(Debug, Clone)]
struct Compiled {
    opcode: Opcode,
    dest: Option<usize>,
    srcs: Vec<Src>,
    targets: Vec<usize>,
    modifier: Modifier,
}

#[derive(Debug, Clone, Copy)]
enum Loc {
    Reg(usize),
    Mem(u32),
    Imm,
}

/// A program lowered for execution: registers resolved to slots, labels to
/// block indices, loop bodies precomputed for chunking.
#[derive(Debug, Clone)]
pub struct Machine {
    code: Vec<Compiled>,
    block_start: Vec<usize>,
    reg_names: Vec<String>,
    inputs: Vec<(usize, String, OperandKind)>,
    /// For each block that is an annotated loop header, the blocks of its loop.
    loop_bodies: Vec<Option<Vec<bool>>>,
    outputs: Vec<String>,
}

fn imm_name(op: &Operand) -> String {
    match op {
        Operand::Int(v) => format!("#{v}"),
        Operand::Float(v) => format!("#{}", format_float(*v)),
        Operand::Addr(a) => format!("#{a}"),
        _ => unreachable!("not an immediate"),
    }
}

impl Machine {
    pub fn new(program: &Program) -> Result<Machine, ExecError> {
        let report = validate_program(program);
        if !report.is_ok() {
            return Err(ExecError::InvalidProgram(report));
        }
        let mut regs: HashMap<String, usize> = HashMap::new();
        let mut reg_names = Vec::new();
        let mut slot = |name: &str| -> usize {
            *regs.entry(name.to_string()).or_insert_with(|| {
                reg_names.push(name.to_string());
                reg_names.len() - 1
            })
        };
        let inputs = program
            .inputs
            .iter()
            .map(|d| (slot(&d.name), d.name.clone(), d.kind))
            .collect();
        let mut code = Vec::new();
        let mut block_start = Vec::new();
        for block in &program.blocks {
            block_start.push(code.len());
            for ins in &block.instructions {
                let mut srcs = Vec::new();
                let mut targets = Vec::new();
                let mut modifier = Modifier::default();
                for op in &ins.operands {
                    match op {
                        Operand::Reg(r) => srcs.push(Src::Reg(slot(r))),
                        Operand::Int(v) => srcs.push(Src::Imm(Value::int(*v), imm_name(op))),
                        Operand::Float(v) => srcs.push(Src::Imm(Value::float(*v), imm_name(op))),
                        Operand::Addr(a) => srcs.push(Src::Imm(Value::Ptr(*a), imm_name(op))),
                        Operand::Label(l) => match ins.opcode {
                            Opcode::Icmp | Opcode::Fcmp => {
                                modifier.predicate = Predicate::from_name(l)
                            }
                            Opcode::Call => modifier.intrinsic = Intrinsic::from_name(l),
                            _ => targets.push(program.block_index(l).expect("validated label")),
                        },
                    }
                }
                code.push(Compiled {
                    opcode: ins.opcode,
                    dest: ins.dest.as_deref().map(&mut slot),
                    srcs,
                    targets,
                    modifier,
                });
            }
        }
        block_start.push(code.len());
        let mut loop_bodies = vec![None; program.blocks.len()];
        for l in &program.loops {
            let h = program.block_index(l).expect("validated loop header");
            let body = program.loop_body(h);
            loop_bodies[h] = Some(
                (0..program.blocks.len())
                    .map(|b| body.contains(&b))
                    .collect(),
            );
        }
        Ok(Machine {
            code,
            block_start,
            reg_names,
            inputs,
            loop_bodies,
            outputs: program
                .outputs
                .iter()
                .map(|d| format!("%{}", d.name))
                .collect(),
        })
    }

    /// Checks that `bindings` cover every declared input with the right kind.
    pub fn check_bindings(&self, bindings: &Bindings) -> Result<(), ExecError> {
        for (_, name, kind) in &self.inputs {
            let v = bindings
                .get(name)
                .ok_or_else(|| ExecError::UnboundInput(name.clone()))?;
            if v.kind() != *kind {
                return Err(ExecError::InputKind {
                    name: name.clone(),
                    expected: *kind,
                    found: v.kind(),
                });
            }
        }
        Ok(())
    }

    /// Runs the program. Bindings must have passed [`Machine::check_bindings`].
    pub fn run(
        &self,
        bindings: &Bindings,
        budget: u64,
        fault: Option<InjectionPoint>,
        record_trace: bool,
    ) -> ExecutionOutcome {
        let mut run = Run {
            m: self,
            regs: vec![None; self.reg_names.len()],
            mem: vec![Value::I32(0); MEMORY_CELLS as usize],
            outputs: Vec::new(),
            steps: 0,
            fault,
            records: record_trace.then(Vec::new),
            delimiters: Vec::new(),
            region: None,
        };
        for (slot, name, _) in &self.inputs {
            run.regs[*slot] = bindings.get(name).copied();
        }
        let status = run.exec(budget);
        let trace = run.records.take().map(|records| Trace {
            chunks: split_chunks(records, &run.delimiters),
            outputs: self.outputs.clone(),
        });
        let outputs = if status == Status::Completed {
            run.outputs
        } else {
            Vec::new()
        };
        ExecutionOutcome {
            status,
            outputs,
            steps: run.steps,
            trace,
        }
    }
}

struct Run<'m> {
    m: &'m Machine,
    regs: Vec<Option<Value>>,
    mem: Vec<Value>,
    outputs: Vec<Value>,
    steps: u64,
    fault: Option<InjectionPoint>,
    records: Option<Vec<InstructionRecord>>,
    delimiters: Vec<usize>,
    /// Loop header whose execution the current chunk covers.
    region: Option<usize>,
}

impl Run<'_> {
    fn enter_block(&mut self, block: usize) {
        let Some(records) = &self.records else { return };
        if let Some(h) = self.region {
            let body = self.m.loop_bodies[h].as_ref().expect("region is a header");
            if body[block] {
                return;
            }
        }
        let was_loop = self.region.is_some();
        let is_header = self.m.loop_bodies[block].is_some();
        if is_header || was_loop {
            let at = records.len();
            if self.delimiters.last() != Some(&at) {
                self.delimiters.push(at);
            }
            self.region = is_header.then_some(block);
        }
    }

    fn read(&self, src: &Src) -> Result<(Loc, Value), Trap> {
        match src {
            Src::Reg(r) => self.regs[*r]
                .map(|v| (Loc::Reg(*r), v))
                .ok_or_else(|| Trap::Undefined(self.m.reg_names[*r].clone())),
            Src::Imm(v, _) => Ok((Loc::Imm, *v)),
        }
    }

    fn write(&mut self, loc: Loc, v: Value) {
        match loc {
            Loc::Reg(r) => self.regs[r] = Some(v),
            Loc::Mem(a) => self.mem[a as usize] = v,
            Loc::Imm => {}
        }
    }

    /// Flips the faulted bit if operand `slot` of the current instance is
    /// the injection target. The corrupted value is written back to its
    /// location.
    fn maybe_flip(
        &mut self,
        fault: Option<InjectionPoint>,
        slot: usize,
        loc: Loc,
        v: Value,
    ) -> Value {
        match fault {
            Some(f) if f.operand_slot == slot && f.bit_index < v.width() => {
                let flipped = v.flip(f.bit_index);
                self.write(loc, flipped);
                flipped
            }
            _ => v,
        }
    }

    fn location_name(&self, loc: Loc, src: Option<&Src>) -> String {
        match (loc, src) {
            (Loc::Reg(r), _) => format!("%{}", self.m.reg_names[r]),
            (Loc::Mem(a), _) => memory_location(a),
            (Loc::Imm, Some(Src::Imm(_, name))) => name.clone(),
            (Loc::Imm, _) => "#".to_string(),
        }
    }

    fn address(v: Value, op: Opcode) -> Result<u32, Trap> {
        match v {
            Value::Ptr(a) if a < MEMORY_CELLS => Ok(a),
            Value::Ptr(a) => Err(Trap::AddressOutOfRange(a)),
            _ => Err(Trap::TypeMismatch(op)),
        }
    }

    fn exec(&mut self, budget: u64) -> Status {
        let m = self.m;
        let n_blocks = m.block_start.len() - 1;
        let mut block = 0usize;
        let mut prev_block: Option<usize> = None;
        let mut pc = m.block_start[0];
        self.enter_block(0);
        loop {
            if pc == m.block_start[block + 1] {
                if block + 1 >= n_blocks {
                    return Status::Trapped(Trap::FellOffEnd);
                }
                prev_block = Some(block);
                block += 1;
                self.enter_block(block);
                continue;
            }
            if self.steps >= budget {
                return Status::Hung;
            }
            let ins = &m.code[pc];
            let dyn_index = self.steps;
            self.steps += 1;
            let fault = self.fault.filter(|f| f.dyn_index as u64 == dyn_index);

            let mut inputs: Vec<(Loc, Value, Option<&Src>)> = Vec::with_capacity(3);
            let mut output: Option<(Loc, Value)> = None;
            let mut next_block: Option<usize> = None;
            let mut halted = false;

            let step: Result<(), Trap> = (|| {
                match ins.opcode {
                    Opcode::Load => {
                        let (loc, v) = self.read(&ins.srcs[0])?;
                        let v = self.maybe_flip(fault, 0, loc, v);
                        inputs.push((loc, v, Some(&ins.srcs[0])));
                        let addr = Self::address(v, ins.opcode)?;
                        let cell = Loc::Mem(addr);
                        let stored = self.maybe_flip(fault, 1, cell, self.mem[addr as usize]);
                        inputs.push((cell, stored, None));
                        let out = self.maybe_flip(fault, 2, Loc::Imm, stored);
                        output = Some((Loc::Reg(ins.dest.expect("load has a destination")), out));
                    }
                    Opcode::Store => {
                        let mut vals = [Value::I32(0); 2];
                        for (slot, src) in ins.srcs.iter().enumerate() {
                            let (loc, v) = self.read(src)?;
                            let v = self.maybe_flip(fault, slot, loc, v);
                            inputs.push((loc, v, Some(src)));
                            vals[slot] = v;
                        }
                        let addr = Self::address(vals[1], ins.opcode)?;
                        let out = self.maybe_flip(fault, 2, Loc::Imm, vals[0]);
                        output = Some((Loc::Mem(addr), out));
                    }
                    Opcode::Br => next_block = Some(ins.targets[0]),
                    Opcode::Halt => halted = true,
                    _ => {
                        for (slot, src) in ins.srcs.iter().enumerate() {
                            let (loc, v) = self.read(src)?;
                            let v = self.maybe_flip(fault, slot, loc, v);
                            inputs.push((loc, v, Some(src)));
                        }
                        let vals: Vec<Value> = inputs.iter().map(|(_, v, _)| *v).collect();
                        match ins.opcode {
                            Opcode::BrCond => {
                                let c = vals[0].as_i32().ok_or(Trap::TypeMismatch(ins.opcode))?;
                                next_block = Some(ins.targets[if c != 0 { 0 } else { 1 }]);
                            }
                            Opcode::Output => self.outputs.push(vals[0]),
                            _ => {
                                let args: &[Value] = if ins.opcode == Opcode::Phi {
                                    let from_first = prev_block == Some(ins.targets[0]);
                                    &vals[if from_first { 0 } else { 1 }..][..1]
                                } else {
                                    &vals
                                };
                                let result = compute(ins.opcode, args, ins.modifier)?;
                                let slot = ins.srcs.len();
                                let result = self.maybe_flip(fault, slot, Loc::Imm, result);
                                output =
                                    Some((Loc::Reg(ins.dest.expect("value-producing")), result));
                            }
                        }
                    }
                }
                Ok(())
            })();

            if let Some((loc, v)) = output {
                self.write(loc, v);
            }
            if let Err(trap) = step {
                return Status::Trapped(trap);
            }
            if self.records.is_some() {
                let rec = self.make_record(ins, dyn_index, &inputs, output);
                self.records.as_mut().expect("checked").push(rec);
            }
            if halted {
                return Status::Completed;
            }
            match next_block {
                Some(b) => {
                    prev_block = Some(block);
                    block = b;
                    pc = m.block_start[b];
                    self.enter_block(b);
                }
                None => pc += 1,
            }
        }
    }

    fn make_record(
        &self,
        ins: &Compiled,
        dyn_index: u64,
        inputs: &[(Loc, Value, Option<&Src>)],
        output: Option<(Loc, Value)>,
    ) -> InstructionRecord {
        let mut operands: Vec<OperandRecord> = inputs
            .iter()
            .map(|(loc, v, src)| {
                OperandRecord::new(self.location_name(*loc, *src), *v, Role::Input)
            })
            .collect();
        if let Some((loc, v)) = output {
            operands.push(OperandRecord::new(
                self.location_name(loc, None),
                v,
                Role::Output,
            ));
        }
        let values: Vec<Value> = inputs.iter().map(|(_, v, _)| *v).collect();
        let mut aux = Aux::default();
        match ins.opcode.group() {
            crate::ir::GroupTag::Shift => aux.shamt = shift_amount(&values),
            crate::ir::GroupTag::Truncation => {
                if let Some((s, d)) = truncation_widths(ins.opcode, &values) {
                    aux.srcw = Some(s);
                    aux.dstw = Some(d);
                }
            }
            _ => {}
        }
        aux.pred = ins.modifier.predicate.map(|p| p.code() as u32);
        InstructionRecord {
            seq: dyn_index,
            opcode: ins.opcode,
            operands,
            aux,
        }
    }
}

/// Runs a program fault-free and records its trace.
pub fn execute(
    program: &Program,
    inputs: &Bindings,
    step_budget: u64,
) -> Result<ExecutionOutcome, ExecError> {
    let machine = Machine::new(program)?;
    machine.check_bindings(inputs)?;
    Ok(machine.run(inputs, step_budget, None, true))
}
