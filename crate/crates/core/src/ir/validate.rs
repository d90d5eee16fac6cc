use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use super::{Opcode, Program};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UndefinedLabel {
        block: String,
        label: String,
    },
    DuplicateLabel(String),
    UnknownLoopHeader(String),
    UseBeforeDef {
        block: String,
        register: String,
    },
    /// A declared output is not emitted on some path reaching `halt`; `path`
    /// lists the blocks of one such path starting at the entry block.
    OutputUnwritten {
        output: String,
        path: Vec<String>,
    },
    CodeAfterTerminator(String),
    FallsOffEnd(String),
    DuplicateDecl(String),
    EmptyProgram,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UndefinedLabel { block, label } => {
                write!(f, "undefined label: ${label} (in block {block})")
            }
            Violation::DuplicateLabel(l) => write!(f, "duplicate block label: {l}"),
            Violation::UnknownLoopHeader(l) => write!(f, "loop header is not a block: {l}"),
            Violation::UseBeforeDef { register, block } => {
                write!(f, "use before def: %{register} (in block {block})")
            }
            Violation::OutputUnwritten { output, path } => {
                write!(
                    f,
                    "output %{output} unwritten on path {}",
                    path.join(" -> ")
                )
            }
            Violation::CodeAfterTerminator(b) => {
                write!(f, "instructions after terminator in block {b}")
            }
            Violation::FallsOffEnd(b) => write!(f, "block {b} falls off the end of the program"),
            Violation::DuplicateDecl(n) => write!(f, "duplicate declaration of %{n}"),
            Violation::EmptyProgram => f.write_str("program has no blocks"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the structural invariants of a program. Violations are returned as
/// data; this never fails.
pub fn validate_program(p: &Program) -> ValidationReport {
    let mut violations = Vec::new();
    if p.blocks.is_empty() {
        violations.push(Violation::EmptyProgram);
        return ValidationReport { violations };
    }

    let mut labels = HashSet::new();
    for b in &p.blocks {
        if !labels.insert(b.label.as_str()) {
            violations.push(Violation::DuplicateLabel(b.label.clone()));
        }
    }
    // an input may also be listed as an output
    for list in [&p.inputs, &p.outputs] {
        let mut seen = HashSet::new();
        for d in list {
            if !seen.insert(d.name.as_str()) {
                violations.push(Violation::DuplicateDecl(d.name.clone()));
            }
        }
    }
    for l in &p.loops {
        if !labels.contains(l.as_str()) {
            violations.push(Violation::UnknownLoopHeader(l.clone()));
        }
    }
    for (i, b) in p.blocks.iter().enumerate() {
        for ins in &b.instructions {
            for l in ins.block_refs() {
                if !labels.contains(l) {
                    violations.push(Violation::UndefinedLabel {
                        block: b.label.clone(),
                        label: l.to_string(),
                    });
                }
            }
        }
        if let Some(pos) = b
            .instructions
            .iter()
            .position(|ins| ins.opcode.is_terminator())
        {
            if pos + 1 != b.instructions.len() {
                violations.push(Violation::CodeAfterTerminator(b.label.clone()));
            }
        } else if i + 1 == p.blocks.len() {
            violations.push(Violation::FallsOffEnd(b.label.clone()));
        }
    }

    let reachable = reachable_blocks(p);
    check_definitions(p, &reachable, &mut violations);
    for out in &p.outputs {
        if let Some(path) = unwritten_output_path(p, &out.name) {
            violations.push(Violation::OutputUnwritten {
                output: out.name.clone(),
                path,
            });
        }
    }
    ValidationReport { violations }
}

fn reachable_blocks(p: &Program) -> Vec<bool> {
    let mut seen = vec![false; p.blocks.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(b) = stack.pop() {
        for s in p.successors(b) {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Forward must-be-defined analysis over registers.
fn check_definitions<'a>(p: &'a Program, reachable: &[bool], violations: &mut Vec<Violation>) {
    let n = p.blocks.len();
    let universe: BTreeSet<&'a str> = p
        .inputs
        .iter()
        .map(|d| d.name.as_str())
        .chain(
            p.blocks
                .iter()
                .flat_map(|b| b.instructions.iter().filter_map(|i| i.dest.as_deref())),
        )
        .collect();
    let mut preds = vec![Vec::new(); n];
    for b in 0..n {
        if reachable[b] {
            for s in p.successors(b) {
                preds[s].push(b);
            }
        }
    }
    let entry_in: BTreeSet<&'a str> = p.inputs.iter().map(|d| d.name.as_str()).collect();
    let mut out_sets: Vec<BTreeSet<&'a str>> = vec![universe.clone(); n];
    fn transfer<'p>(p: &'p Program, b: usize, mut set: BTreeSet<&'p str>) -> BTreeSet<&'p str> {
        for ins in &p.blocks[b].instructions {
            if let Some(d) = ins.dest.as_deref() {
                set.insert(d);
            }
        }
        set
    }
    let in_set = |b: usize, out_sets: &[BTreeSet<&'a str>]| -> BTreeSet<&'a str> {
        let mut acc = if b == 0 { Some(entry_in.clone()) } else { None };
        for &q in &preds[b] {
            acc = Some(match acc {
                None => out_sets[q].clone(),
                Some(a) => a.intersection(&out_sets[q]).copied().collect(),
            });
        }
        acc.unwrap_or_default()
    };
    let mut changed = true;
    while changed {
        changed = false;
        for b in (0..n).filter(|&b| reachable[b]) {
            let new_out = transfer(p, b, in_set(b, &out_sets));
            if new_out != out_sets[b] {
                out_sets[b] = new_out;
                changed = true;
            }
        }
    }
    let mut reported = HashSet::new();
    for b in (0..n).filter(|&b| reachable[b]) {
        let mut defined = in_set(b, &out_sets);
        for ins in &p.blocks[b].instructions {
            for r in ins.uses() {
                if !defined.contains(r) && reported.insert(r.to_string()) {
                    violations.push(Violation::UseBeforeDef {
                        block: p.blocks[b].label.clone(),
                        register: r.to_string(),
                    });
                }
            }
            if let Some(d) = ins.dest.as_deref() {
                defined.insert(d);
            }
        }
    }
}

/// Breadth-first search over (block, output-emitted) states for a path from
/// the entry to a `halt` that never emits `output %name`.
fn unwritten_output_path(p: &Program, name: &str) -> Option<Vec<String>> {
    let emits =
        |ins: &super::Instruction| ins.opcode == Opcode::Output && ins.uses().next() == Some(name);
    let n = p.blocks.len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    visited[0] = true;
    queue.push_back(0);
    while let Some(b) = queue.pop_front() {
        let block = &p.blocks[b];
        if block.instructions.iter().any(emits) {
            continue;
        }
        if block.instructions.iter().any(|i| i.opcode == Opcode::Halt) {
            let mut path = vec![b];
            let mut cur = b;
            while let Some(q) = parent[cur] {
                path.push(q);
                cur = q;
            }
            path.reverse();
            return Some(
                path.into_iter()
                    .map(|i| p.blocks[i].label.clone())
                    .collect(),
            );
        }
        for s in p.successors(b) {
            if !visited[s] {
                visited[s] = true;
                parent[s] = Some(b);
                queue.push_back(s);
            }
        }
    }
    None
}
