//! Independent reference implementations and random input generators used
//! by the integration and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::Rng;
use resil_core::fi::{Bindings, Campaign, InjectionPoint, Manifestation, Verifier};
use resil_core::ir::{Opcode, Program, Value};
use resil_core::trace::{Aux, Chunk, InstructionRecord, OperandRecord, Role, Trace};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn read_corpus(rel: &str) -> String {
    let path = corpus_dir().join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Parses `a/b` or a plain decimal.
pub fn fraction(s: &str) -> f64 {
    match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

// ---------------------------------------------------------------------------
// dead locations

/// Dead-location rate of each chunk straight from the definition: for every
/// distinct location named in a chunk, rescan every later record.
pub fn brute_force_dlr(trace: &Trace) -> Vec<f64> {
    let mut rates = Vec::new();
    for (ci, chunk) in trace.chunks.iter().enumerate() {
        let mut names: Vec<&str> = Vec::new();
        for rec in &chunk.records {
            for op in &rec.operands {
                let n = op.name.as_str();
                if (n.starts_with('%') || n.starts_with('@')) && !names.contains(&n) {
                    names.push(n);
                }
            }
        }
        if names.is_empty() {
            rates.push(0.0);
            continue;
        }
        let mut dead = 0;
        for name in &names {
            if trace.outputs.iter().any(|o| o == name) {
                continue;
            }
            let used_later = trace.chunks[ci + 1..]
                .iter()
                .flat_map(|c| &c.records)
                .flat_map(|r| &r.operands)
                .any(|op| op.name == *name);
            if !used_later {
                dead += 1;
            }
        }
        rates.push(dead as f64 / names.len() as f64);
    }
    rates
}

// ---------------------------------------------------------------------------
// repeated additions

fn is_add(op: Opcode) -> bool {
    op == Opcode::Add || op == Opcode::Fadd
}

fn dest(rec: &InstructionRecord) -> Option<&str> {
    rec.operands
        .iter()
        .find(|o| o.role == Role::Output && (o.name.starts_with('%') || o.name.starts_with('@')))
        .map(|o| o.name.as_str())
}

fn sources(rec: &InstructionRecord) -> Vec<&str> {
    rec.operands
        .iter()
        .filter(|o| o.role == Role::Input && (o.name.starts_with('%') || o.name.starts_with('@')))
        .map(|o| o.name.as_str())
        .collect()
}

/// Does `target` appear among the sources of the addition at `at`, or of
/// any addition whose result flows into it through addition results only?
fn chain_reaches(records: &[InstructionRecord], at: usize, target: &str) -> bool {
    let srcs = sources(&records[at]);
    if srcs.contains(&target) {
        return true;
    }
    for s in srcs {
        // most recent earlier write of s
        let def = (0..at).rev().find(|&k| dest(&records[k]) == Some(s));
        if let Some(k) = def {
            if is_add(records[k].opcode) && chain_reaches(records, k, target) {
                return true;
            }
        }
    }
    false
}

/// Repeated-addition count by walking addition chains directly over the
/// record list.
pub fn chain_scan_ra(chunk: &Chunk, n_self: usize) -> usize {
    let records = &chunk.records;
    let locations: BTreeSet<&str> = records.iter().filter_map(dest).collect();
    let mut count = 0;
    for loc in locations {
        let mut run = 0;
        for (k, rec) in records.iter().enumerate() {
            if dest(rec) != Some(loc) {
                continue;
            }
            if is_add(rec.opcode) && chain_reaches(records, k, loc) {
                run += 1;
            } else {
                if run >= n_self {
                    count += 1;
                }
                run = 0;
            }
        }
        if run >= n_self {
            count += 1;
        }
    }
    count
}

// ---------------------------------------------------------------------------
// exhaustive injection

/// Exact manifestation rates under instruction-first sampling, by running
/// every (instance, operand, bit) point and weighting it by its sampling
/// probability.
pub fn exhaustive_rates(
    program: &Program,
    inputs: &Bindings,
    verifier: Verifier,
) -> ([f64; 3], usize) {
    let campaign = Campaign::new(program, inputs, None, verifier).expect("golden run completes");
    let trace = campaign.golden_trace().clone();
    let injectable = |r: &InstructionRecord| {
        r.opcode != Opcode::Output && r.opcode != Opcode::Halt && !r.operands.is_empty()
    };
    let instances = trace.records().filter(|r| injectable(r)).count();
    let mut rates = [0.0; 3];
    let mut points = 0;
    for (dyn_index, rec) in trace.records().enumerate() {
        if !injectable(rec) {
            continue;
        }
        let p_instance = 1.0 / instances as f64;
        let p_operand = p_instance / rec.operands.len() as f64;
        for (slot, op) in rec.operands.iter().enumerate() {
            let p_bit = p_operand / op.width as f64;
            for bit in 0..op.width {
                let point = InjectionPoint {
                    dyn_index,
                    operand_slot: slot,
                    bit_index: bit,
                };
                let m = campaign.inject(point).expect("point in range");
                let class = match m {
                    Manifestation::Success => 0,
                    Manifestation::Sdc => 1,
                    Manifestation::Interruption => 2,
                };
                rates[class] += p_bit;
                points += 1;
            }
        }
    }
    (rates, points)
}

// ---------------------------------------------------------------------------
// random traces

const REGS: [&str; 8] = ["%a", "%b", "%c", "%d", "%e", "%f", "%g", "%h"];

fn operand(name: &str, value: Value, role: Role) -> OperandRecord {
    OperandRecord::new(name, value, role)
}

fn random_i32<R: Rng>(rng: &mut R) -> Value {
    Value::I32(rng.random_range(0..64))
}

fn random_source<R: Rng>(rng: &mut R, regs: &[&str]) -> String {
    if rng.random_bool(0.2) {
        format!("#{}", rng.random_range(0..10))
    } else {
        regs.choose(rng).unwrap().to_string()
    }
}

fn memory_name<R: Rng>(rng: &mut R) -> String {
    format!("@{:08x}", rng.random_range(0..6u32))
}

/// A random record that obeys the trace arity of its opcode.
pub fn random_record<R: Rng>(rng: &mut R, seq: u64, regs: &[&str]) -> InstructionRecord {
    const OPS: [Opcode; 16] = [
        Opcode::Add,
        Opcode::Fadd,
        Opcode::Mul,
        Opcode::Fmul,
        Opcode::Load,
        Opcode::Store,
        Opcode::Shl,
        Opcode::Lshr,
        Opcode::Trunc,
        Opcode::Icmp,
        Opcode::Xor,
        Opcode::BrCond,
        Opcode::Br,
        Opcode::Select,
        Opcode::Output,
        Opcode::Getelementptr,
    ];
    let opcode = *OPS.choose(rng).unwrap();
    let float = matches!(opcode, Opcode::Fadd | Opcode::Fmul);
    let val = |rng: &mut R| {
        if float {
            Value::float(rng.random_range(0..8) as f64 * 0.5)
        } else {
            random_i32(rng)
        }
    };
    let mut aux = Aux::default();
    let mut operands = Vec::new();
    match opcode {
        Opcode::Load => {
            operands.push(operand(
                &random_source(rng, regs),
                Value::Ptr(rng.random_range(0..6)),
                Role::Input,
            ));
            operands.push(operand(&memory_name(rng), random_i32(rng), Role::Input));
            operands.push(operand(
                regs.choose(rng).unwrap(),
                random_i32(rng),
                Role::Output,
            ));
        }
        Opcode::Store => {
            operands.push(operand(
                &random_source(rng, regs),
                random_i32(rng),
                Role::Input,
            ));
            operands.push(operand(
                &random_source(rng, regs),
                Value::Ptr(rng.random_range(0..6)),
                Role::Input,
            ));
            operands.push(operand(&memory_name(rng), random_i32(rng), Role::Output));
        }
        Opcode::Br => {}
        Opcode::BrCond | Opcode::Output => {
            operands.push(operand(
                &random_source(rng, regs),
                random_i32(rng),
                Role::Input,
            ));
        }
        _ => {
            let (n_in, n_out) = opcode.trace_arity();
            for _ in 0..n_in {
                let v = val(rng);
                operands.push(operand(&random_source(rng, regs), v, Role::Input));
            }
            for _ in 0..n_out {
                let v = val(rng);
                operands.push(operand(regs.choose(rng).unwrap(), v, Role::Output));
            }
            match opcode {
                Opcode::Shl | Opcode::Lshr => aux.shamt = Some(rng.random_range(0..32)),
                Opcode::Trunc => {
                    aux.srcw = Some(32);
                    aux.dstw = Some(rng.random_range(1..=32));
                }
                Opcode::Icmp => aux.pred = Some(rng.random_range(0..10)),
                _ => {}
            }
        }
    }
    InstructionRecord {
        seq,
        opcode,
        operands,
        aux,
    }
}

/// A random trace with 1..=`max_chunks` nonempty chunks and at most
/// `max_records` records in total.
pub fn random_trace<R: Rng>(rng: &mut R, max_chunks: usize, max_records: usize) -> Trace {
    let n_chunks = rng.random_range(1..=max_chunks);
    let total = rng.random_range(n_chunks..=max_records.max(n_chunks));
    // cut points splitting `total` records into `n_chunks` nonempty pieces
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, total - 1, n_chunks - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(total);
    let mut seq = 0u64;
    let mut chunks = Vec::new();
    let mut start = 0;
    for end in cuts {
        let records = (start..end)
            .map(|_| {
                seq += rng.random_range(1..3);
                random_record(rng, seq, &REGS)
            })
            .collect();
        chunks.push(Chunk {
            id: chunks.len(),
            records,
        });
        start = end;
    }
    let outputs = REGS
        .iter()
        .filter(|_| rng.random_bool(0.25))
        .map(|s| s.to_string())
        .collect();
    Trace { chunks, outputs }
}

/// A chunk dominated by additions over a small register pool, with
/// occasional interfering writes and reads.
pub fn random_addition_chunk<R: Rng>(rng: &mut R, max_additions: usize) -> Chunk {
    let regs = &REGS[..rng.random_range(2..=5)];
    let additions = rng.random_range(0..=max_additions);
    let mut records = Vec::new();
    let mut adds = 0;
    let mut seq = 0;
    while adds < additions {
        let rec = if rng.random_bool(0.75) {
            adds += 1;
            let opcode = if rng.random_bool(0.5) {
                Opcode::Add
            } else {
                Opcode::Fadd
            };
            let v = if opcode == Opcode::Add {
                Value::int(1)
            } else {
                Value::float(1.0)
            };
            let operands = vec![
                operand(&random_source(rng, regs), v, Role::Input),
                operand(&random_source(rng, regs), v, Role::Input),
                operand(regs.choose(rng).unwrap(), v, Role::Output),
            ];
            InstructionRecord {
                seq,
                opcode,
                operands,
                aux: Aux::default(),
            }
        } else {
            random_record(rng, seq, regs)
        };
        records.push(rec);
        seq += 1;
    }
    Chunk { id: 0, records }
}

// ---------------------------------------------------------------------------
// random programs

/// Source text of a random valid program, plus bindings for its inputs.
///
/// Every program has a straight-line prologue, an optional counted loop
/// and an epilogue that outputs one integer and one float register.
pub fn random_program<R: Rng>(rng: &mut R) -> (String, Bindings) {
    let mut text = String::from(
        ".input %a i32\n.input %b i32\n.input %x f64\n.output %r i32\n.output %y f64\n",
    );
    let with_loop = rng.random_bool(0.6);
    if with_loop {
        text.push_str(".loop body\n");
    }
    let mut ints = vec!["%a".to_string(), "%b".to_string()];
    let mut floats = vec!["%x".to_string()];
    let mut fresh = 0;
    let mut body = |rng: &mut R,
                    text: &mut String,
                    ints: &mut Vec<String>,
                    floats: &mut Vec<String>,
                    n: usize| {
        for _ in 0..n {
            fresh += 1;
            let pick_i = |rng: &mut R, v: &Vec<String>| {
                if rng.random_bool(0.2) {
                    rng.random_range(-9..10).to_string()
                } else {
                    v.choose(rng).unwrap().clone()
                }
            };
            let pick_f = |rng: &mut R, v: &Vec<String>| {
                if rng.random_bool(0.2) {
                    format!("{}.5", rng.random_range(0..4))
                } else {
                    v.choose(rng).unwrap().clone()
                }
            };
            // reuse an existing name now and then so registers get overwritten
            let reuse = rng.random_bool(0.3);
            match rng.random_range(0..9) {
                0..=3 => {
                    let op = [
                        "add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr",
                    ]
                    .choose(rng)
                    .unwrap();
                    let (a, b) = (pick_i(rng, ints), pick_i(rng, ints));
                    let d = if reuse {
                        ints.choose(rng).unwrap().clone()
                    } else {
                        format!("%t{fresh}")
                    };
                    text.push_str(&format!("  {d} = {op} {a}, {b}\n"));
                    ints.push(d);
                }
                4..=5 => {
                    let op = ["fadd", "fsub", "fmul"].choose(rng).unwrap();
                    let (a, b) = (pick_f(rng, floats), pick_f(rng, floats));
                    let d = if reuse {
                        floats.choose(rng).unwrap().clone()
                    } else {
                        format!("%f{fresh}")
                    };
                    text.push_str(&format!("  {d} = {op} {a}, {b}\n"));
                    floats.push(d);
                }
                6 => {
                    let (a, b) = (pick_i(rng, ints), pick_i(rng, ints));
                    let d = format!("%c{fresh}");
                    let pred = ["eq", "ne", "slt", "sge", "ult"].choose(rng).unwrap();
                    text.push_str(&format!("  {d} = icmp ${pred}, {a}, {b}\n"));
                    ints.push(d);
                }
                7 => {
                    let a = pick_i(rng, ints);
                    let d = format!("%t{fresh}");
                    let op = ["trunc", "zext", "sext"].choose(rng).unwrap();
                    text.push_str(&format!("  {d} = {op} {a}, {}\n", rng.random_range(1..=32)));
                    ints.push(d);
                }
                _ => {
                    let a = pick_i(rng, ints);
                    let p = format!("%p{fresh}");
                    text.push_str(&format!(
                        "  {p} = getelementptr @{}, 0\n",
                        rng.random_range(0..64)
                    ));
                    text.push_str(&format!("  store {a}, {p}\n"));
                    let d = format!("%t{fresh}");
                    text.push_str(&format!("  {d} = load {p}\n"));
                    ints.push(d);
                }
            }
        }
    };
    text.push_str("entry:\n");
    let n = rng.random_range(1..6);
    body(rng, &mut text, &mut ints, &mut floats, n);
    if with_loop {
        text.push_str("  %i = add 0, 0\nbody:\n");
        let n = rng.random_range(1..5);
        // names first defined inside the loop are not visible after it
        let (saved_i, saved_f) = (ints.clone(), floats.clone());
        body(rng, &mut text, &mut ints, &mut floats, n);
        ints = saved_i;
        floats = saved_f;
        let iterations = rng.random_range(1..5);
        text.push_str(&format!("  %i = add %i, 1\n  %lc = icmp $slt, %i, {iterations}\n  br_cond %lc, $body, $exit\nexit:\n"));
        let n = rng.random_range(0..3);
        body(rng, &mut text, &mut ints, &mut floats, n);
    }
    let r = ints.choose(rng).unwrap().clone();
    let y = floats.choose(rng).unwrap().clone();
    text.push_str(&format!(
        "  %r = add {r}, 0\n  %y = fadd {y}, 0.0\n  output %r\n  output %y\n  halt\n"
    ));
    let mut bindings = Bindings::new();
    bindings.insert("a".into(), Value::int(rng.random_range(-100..100)));
    bindings.insert("b".into(), Value::int(rng.random_range(-100..100)));
    bindings.insert(
        "x".into(),
        Value::float(rng.random_range(-8..8) as f64 * 0.25),
    );
    (text, bindings)
}
