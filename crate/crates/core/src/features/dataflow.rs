use std::collections::HashMap;

use crate::ir::Opcode;
use crate::trace::{Chunk, InstructionRecord, Trace};

fn output_location(rec: &InstructionRecord) -> Option<&str> {
    rec.output()
        .filter(|o| o.is_location())
        .map(|o| o.name.as_str())
}

fn input_locations(rec: &InstructionRecord) -> impl Iterator<Item = &str> {
    rec.inputs()
        .filter(|o| o.is_location())
        .map(|o| o.name.as_str())
}

/// Share of a chunk's instances whose write lands on a location whose
/// previous write in the chunk was never read.
pub fn overwrite_feature(chunk: &Chunk) -> f64 {
    if chunk.is_empty() {
        return 0.0;
    }
    // location -> has the latest write been read
    let mut last_write: HashMap<&str, bool> = HashMap::new();
    let mut count = 0usize;
    for rec in &chunk.records {
        for loc in input_locations(rec) {
            if let Some(read) = last_write.get_mut(loc) {
                *read = true;
            }
        }
        if let Some(loc) = output_location(rec) {
            if last_write.insert(loc, false) == Some(false) {
                count += 1;
            }
        }
    }
    count as f64 / chunk.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadLocationRates {
    pub per_chunk: Vec<f64>,
    pub average: f64,
}

/// Dead-location rate of every chunk.
///
/// One location set is built per chunk; a backward sweep over the sets then
/// keeps the union of everything named later, so each chunk is answered by
/// set membership alone.
pub fn dead_location_rates(trace: &Trace) -> DeadLocationRates {
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let sets: Vec<Vec<u32>> = trace
        .chunks
        .iter()
        .map(|c| {
            let mut set: Vec<u32> = c
                .records
                .iter()
                .flat_map(|r| r.operands.iter())
                .filter(|o| o.is_location())
                .map(|o| {
                    let next = ids.len() as u32;
                    *ids.entry(o.name.as_str()).or_insert(next)
                })
                .collect();
            set.sort_unstable();
            set.dedup();
            set
        })
        .collect();

    let mut live = vec![false; ids.len()];
    for name in &trace.outputs {
        if let Some(&id) = ids.get(name.as_str()) {
            live[id as usize] = true;
        }
    }
    let mut per_chunk = vec![0.0; sets.len()];
    for (i, set) in sets.iter().enumerate().rev() {
        if !set.is_empty() {
            let dead = set.iter().filter(|&&id| !live[id as usize]).count();
            per_chunk[i] = dead as f64 / set.len() as f64;
        }
        for &id in set {
            live[id as usize] = true;
        }
    }
    let average = if per_chunk.is_empty() {
        0.0
    } else {
        per_chunk.iter().sum::<f64>() / per_chunk.len() as f64
    };
    DeadLocationRates { per_chunk, average }
}

fn is_addition(op: Opcode) -> bool {
    matches!(op, Opcode::Add | Opcode::Fadd)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditionNode {
    /// Position of the instance within its chunk.
    pub position: usize,
    pub seq: u64,
    pub output: String,
    pub sources: Vec<String>,
}

/// Dependencies among the addition instances of one chunk.
///
/// `deps[j]` lists the nodes whose results node `j` reads directly. A
/// source whose reaching write is not an addition has no edge.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataDependencyGraph {
    pub nodes: Vec<AdditionNode>,
    pub deps: Vec<Vec<usize>>,
}

impl DataDependencyGraph {
    pub fn build(chunk: &Chunk) -> Self {
        let mut graph = DataDependencyGraph::default();
        let mut reaching: HashMap<&str, Option<usize>> = HashMap::new();
        for (position, rec) in chunk.records.iter().enumerate() {
            let Some(out) = output_location(rec) else {
                continue;
            };
            if !is_addition(rec.opcode) {
                reaching.insert(out, None);
                continue;
            }
            let sources: Vec<&str> = input_locations(rec).collect();
            let mut deps: Vec<usize> = sources
                .iter()
                .filter_map(|s| reaching.get(s).copied().flatten())
                .collect();
            deps.sort_unstable();
            deps.dedup();
            let id = graph.nodes.len();
            graph.nodes.push(AdditionNode {
                position,
                seq: rec.seq,
                output: out.to_string(),
                sources: sources.iter().map(|s| s.to_string()).collect(),
            });
            graph.deps.push(deps);
            reaching.insert(out, Some(id));
        }
        graph
    }

    /// For every node, whether its output location is a source of some
    /// node reachable backward from it, itself included.
    pub fn self_additions(&self) -> Vec<bool> {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        for n in &self.nodes {
            for s in n.sources.iter().chain(std::iter::once(&n.output)) {
                let next = ids.len();
                ids.entry(s.as_str()).or_insert(next);
            }
        }
        let words = ids.len().div_ceil(64);
        // Source locations of each node's backward closure, as a bitset.
        let mut reach: Vec<Vec<u64>> = Vec::with_capacity(self.nodes.len());
        let mut result = Vec::with_capacity(self.nodes.len());
        for (j, node) in self.nodes.iter().enumerate() {
            let mut bits = vec![0u64; words];
            for s in &node.sources {
                let id = ids[s.as_str()];
                bits[id / 64] |= 1 << (id % 64);
            }
            for &d in &self.deps[j] {
                for (b, r) in bits.iter_mut().zip(&reach[d]) {
                    *b |= r;
                }
            }
            let out = ids[node.output.as_str()];
            result.push(bits[out / 64] >> (out % 64) & 1 == 1);
            reach.push(bits);
        }
        result
    }
}

/// Number of maximal runs of at least `n_self` consecutive self additions
/// to one location. Any other write to the location ends its run.
pub fn repeated_addition_count(chunk: &Chunk, n_self: usize) -> usize {
    let graph = DataDependencyGraph::build(chunk);
    let self_add = graph.self_additions();
    let mut node_at: HashMap<usize, usize> = HashMap::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        node_at.insert(n.position, i);
    }
    let mut runs: HashMap<&str, usize> = HashMap::new();
    let mut count = 0;
    let threshold = n_self.max(1);
    for (position, rec) in chunk.records.iter().enumerate() {
        let Some(out) = output_location(rec) else {
            continue;
        };
        let run = runs.entry(out).or_insert(0);
        if node_at.get(&position).is_some_and(|&i| self_add[i]) {
            *run += 1;
        } else {
            if *run >= threshold {
                count += 1;
            }
            *run = 0;
        }
    }
    count + runs.values().filter(|&&r| r >= threshold).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Value;
    use crate::trace::{Aux, OperandRecord, Role};

    fn rec(opcode: Opcode, dest: &str, srcs: &[&str]) -> InstructionRecord {
        let mut operands: Vec<_> = srcs
            .iter()
            .map(|s| OperandRecord::new(*s, Value::int(1), Role::Input))
            .collect();
        if !dest.is_empty() {
            operands.push(OperandRecord::new(dest, Value::int(2), Role::Output));
        }
        InstructionRecord {
            seq: 0,
            opcode,
            operands,
            aux: Aux::default(),
        }
    }

    fn chunk(records: Vec<InstructionRecord>) -> Chunk {
        let records = records
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.seq = i as u64;
                r
            })
            .collect();
        Chunk { id: 0, records }
    }

    #[test]
    fn overwrite_examples() {
        let c = chunk(vec![
            rec(Opcode::Add, "%a", &["%x", "%y"]),
            rec(Opcode::Add, "%a", &["%x", "%y"]),
        ]);
        assert_eq!(overwrite_feature(&c), 0.5);
        let fresh = chunk(vec![
            rec(Opcode::Add, "%a", &["%x", "%y"]),
            rec(Opcode::Add, "%b", &["%x", "%y"]),
        ]);
        assert_eq!(overwrite_feature(&fresh), 0.0);
        let wrw = chunk(vec![
            rec(Opcode::Add, "%a", &["%x", "%y"]),
            rec(Opcode::Output, "", &["%a"]),
            rec(Opcode::Add, "%a", &["%x", "%y"]),
        ]);
        assert_eq!(overwrite_feature(&wrw), 0.0);
        // The instance's own read of %a happens before its write.
        let own = chunk(vec![
            rec(Opcode::Add, "%a", &["%x", "#1"]),
            rec(Opcode::Add, "%a", &["%a", "#1"]),
        ]);
        assert_eq!(overwrite_feature(&own), 0.0);
    }

    #[test]
    fn dead_location_examples() {
        let c0 = chunk(vec![rec(Opcode::Add, "%a", &["%b", "#1"])]);
        let mut c1 = chunk(vec![rec(Opcode::Output, "", &["%b"])]);
        c1.id = 1;
        let t = Trace {
            chunks: vec![c0.clone(), c1],
            outputs: vec![],
        };
        let d = dead_location_rates(&t);
        assert_eq!(d.per_chunk, vec![0.5, 1.0]);
        assert_eq!(d.average, 0.75);
        let t = Trace {
            chunks: vec![c0],
            outputs: vec!["%a".into(), "%b".into()],
        };
        assert_eq!(dead_location_rates(&t).per_chunk, vec![0.0]);
    }

    #[test]
    fn repeated_addition_examples() {
        let c = chunk(vec![
            rec(Opcode::Add, "%a", &["%a", "%b"]),
            rec(Opcode::Add, "%a", &["%a", "%c"]),
        ]);
        assert_eq!(repeated_addition_count(&c, 2), 1);
        assert_eq!(repeated_addition_count(&c, 3), 0);
        let none = chunk(vec![rec(Opcode::Mul, "%a", &["%a", "%b"])]);
        assert_eq!(repeated_addition_count(&none, 2), 0);
        // A non-addition write splits the run.
        let split = chunk(vec![
            rec(Opcode::Add, "%a", &["%a", "%b"]),
            rec(Opcode::Mul, "%a", &["%a", "%b"]),
            rec(Opcode::Add, "%a", &["%a", "%b"]),
        ]);
        assert_eq!(repeated_addition_count(&split, 2), 0);
    }

    #[test]
    fn self_addition_through_graph() {
        // e = a + 4; b = e + d; a = b + c: the last addition reaches `a`
        // through two dependency edges.
        let c = chunk(vec![
            rec(Opcode::Add, "%e", &["%a", "#4"]),
            rec(Opcode::Add, "%b", &["%e", "%d"]),
            rec(Opcode::Add, "%a", &["%b", "%c"]),
        ]);
        let g = DataDependencyGraph::build(&c);
        assert_eq!(g.deps, vec![vec![], vec![0], vec![1]]);
        assert_eq!(g.self_additions(), vec![false, false, true]);
        // A load into %b breaks the chain.
        let broken = chunk(vec![
            rec(Opcode::Add, "%e", &["%a", "#4"]),
            rec(Opcode::Load, "%b", &["%p", "@00000010"]),
            rec(Opcode::Add, "%a", &["%b", "%c"]),
        ]);
        let g = DataDependencyGraph::build(&broken);
        assert_eq!(g.self_additions(), vec![false, false]);
    }
}
