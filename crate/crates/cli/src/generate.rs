//! Seed-pinned generator of mini-IR kernels for training corpora.
//!
//! A kernel is a short sequence of phases over small arrays in memory:
//! fills, reductions, stencils, branching scans, pointer chasing and
//! straight-line arithmetic chains. The phase mix, opcode choices and input
//! sizes are drawn from a ChaCha stream keyed by (seed, kernel index), so the
//! same seed always yields the same corpus.

use std::fmt::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resil_core::par::derive_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    pub name: String,
    /// Phase names, in program order.
    pub phases: Vec<&'static str>,
    pub program: String,
    pub inputs: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Elem {
    Int,
    Float,
}

#[derive(Debug, Clone, Copy)]
struct Array {
    base: u32,
    elem: Elem,
}

struct Builder {
    rng: ChaCha8Rng,
    body: String,
    loops: Vec<String>,
    labels: usize,
    regs: usize,
    arrays: Vec<Array>,
    /// Memory regions handed out so far, pointer rings included.
    regions: u32,
    /// Scalar results that may reach the outputs.
    ints: Vec<String>,
    floats: Vec<String>,
}

const INT_OPS: [&str; 6] = ["add", "sub", "mul", "xor", "or", "and"];
const FLOAT_OPS: [&str; 3] = ["fadd", "fsub", "fmul"];

impl Builder {
    fn reg(&mut self, stem: &str) -> String {
        self.regs += 1;
        format!("%{stem}{}", self.regs)
    }

    fn label(&mut self, stem: &str) -> String {
        self.labels += 1;
        format!("{stem}{}", self.labels)
    }

    fn emit(&mut self, line: &str) {
        writeln!(self.body, "        {line}").unwrap();
    }

    fn block(&mut self, label: &str) {
        writeln!(self.body, "{label}:").unwrap();
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn small(&mut self, lo: i32, hi: i32) -> i32 {
        self.rng.random_range(lo..=hi)
    }

    fn fresh_region(&mut self) -> u32 {
        self.regions += 1;
        256 * self.regions
    }

    fn fresh_array(&mut self, elem: Elem) -> Array {
        let a = Array {
            base: self.fresh_region(),
            elem,
        };
        self.arrays.push(a);
        a
    }

    /// Opens a counted loop starting at `start`; returns (counter, header
    /// label, exit label).
    fn open_loop(&mut self, start: i32) -> (String, String, String) {
        let i = self.reg("i");
        let head = self.label("loop");
        let exit = self.label("after");
        self.emit(&format!("{i} = add {start}, 0"));
        self.block(&head);
        self.loops.push(head.clone());
        (i, head, exit)
    }

    /// Advances the counter and loops while `counter + ahead < %n`.
    fn close_loop(&mut self, i: &str, ahead: i32, head: &str, exit: &str) {
        let c = self.reg("c");
        self.emit(&format!("{i} = add {i}, 1"));
        let bound = if ahead == 0 {
            i.to_string()
        } else {
            let e = self.reg("e");
            self.emit(&format!("{e} = add {i}, {ahead}"));
            e
        };
        self.emit(&format!("{c} = icmp $slt, {bound}, %n"));
        self.emit(&format!("br_cond {c}, ${head}, ${exit}"));
        self.block(exit);
    }

    /// Optional values computed and never used.
    fn dead_values(&mut self, src: &str, elem: Elem) {
        for _ in 0..self.small(0, 2) {
            let d = self.reg("dead");
            match elem {
                Elem::Int => {
                    let k = self.small(1, 9);
                    self.emit(&format!("{d} = add {src}, {k}"));
                }
                Elem::Float => self.emit(&format!("{d} = fmul {src}, 1.5")),
            }
        }
    }

    fn int_mix(&mut self, v: &str) -> String {
        let mut cur = v.to_string();
        for _ in 0..self.small(0, 3) {
            let next = self.reg("v");
            match self.small(0, 5) {
                0 => {
                    let k = self.small(1, 4);
                    self.emit(&format!("{next} = shl {cur}, {k}"));
                }
                1 => {
                    let k = self.small(1, 3);
                    self.emit(&format!("{next} = lshr {cur}, {k}"));
                }
                2 => {
                    let mask = *[15, 63, 255, 4095].choose(&mut self.rng).unwrap();
                    self.emit(&format!("{next} = and {cur}, {mask}"));
                }
                3 => self.emit(&format!("{next} = xor {cur}, %m")),
                4 => {
                    let w = *[8, 12, 16].choose(&mut self.rng).unwrap();
                    let t = self.reg("t");
                    self.emit(&format!("{t} = trunc {cur}, {w}"));
                    self.emit(&format!("{next} = zext {t}, {w}"));
                }
                _ => {
                    let op = *INT_OPS.choose(&mut self.rng).unwrap();
                    let k = self.small(2, 7);
                    self.emit(&format!("{next} = {op} {cur}, {k}"));
                }
            }
            cur = next;
        }
        cur
    }

    fn fill(&mut self) {
        let elem = if self.chance(0.5) {
            Elem::Int
        } else {
            Elem::Float
        };
        let a = self.fresh_array(elem);
        let (i, head, exit) = self.open_loop(0);
        let p = self.reg("p");
        self.emit(&format!("{p} = getelementptr @{}, {i}", a.base));
        let v = match elem {
            Elem::Int => {
                let k = self.small(1, 9);
                let v0 = self.reg("v");
                self.emit(&format!("{v0} = mul {i}, {k}"));
                self.int_mix(&v0)
            }
            Elem::Float => {
                let x = self.reg("x");
                let y = self.reg("x");
                self.emit(&format!("{x} = fpext {i}"));
                self.emit(&format!("{y} = fmul {x}, %s"));
                if self.chance(0.5) {
                    let z = self.reg("x");
                    self.emit(&format!("{z} = fadd {y}, 0.25"));
                    z
                } else {
                    y
                }
            }
        };
        self.dead_values(&v, elem);
        self.emit(&format!("store {v}, {p}"));
        self.close_loop(&i, 0, &head, &exit);
    }

    fn pick_array(&mut self) -> Array {
        *self
            .arrays
            .choose(&mut self.rng)
            .expect("a fill comes first")
    }

    fn reduce(&mut self) {
        let a = self.pick_array();
        let acc = self.reg(if a.elem == Elem::Int { "acc" } else { "facc" });
        match a.elem {
            Elem::Int => self.emit(&format!("{acc} = add 0, 0")),
            Elem::Float => self.emit(&format!("{acc} = fadd 0.0, 0.0")),
        }
        let (i, head, exit) = self.open_loop(0);
        let p = self.reg("p");
        let v = self.reg("v");
        self.emit(&format!("{p} = getelementptr @{}, {i}", a.base));
        self.emit(&format!("{v} = load {p}"));
        match a.elem {
            Elem::Int => {
                let w = self.int_mix(&v);
                let op = if self.chance(0.75) { "add" } else { "xor" };
                self.emit(&format!("{acc} = {op} {acc}, {w}"));
                self.ints.push(acc);
            }
            Elem::Float => {
                let w = if self.chance(0.5) {
                    let t = self.reg("t");
                    self.emit(&format!("{t} = fmul {v}, {v}"));
                    t
                } else {
                    v
                };
                self.emit(&format!("{acc} = fadd {acc}, {w}"));
                self.floats.push(acc);
            }
        }
        self.close_loop(&i, 0, &head, &exit);
    }

    fn stencil(&mut self) {
        let src = self.pick_array();
        let dst = self.fresh_array(src.elem);
        // the loop only writes the interior; copy both ends
        let last = self.reg("last");
        self.emit(&format!("{last} = sub %n, 1"));
        for idx in ["0".to_string(), last] {
            let (p, v, q) = (self.reg("p"), self.reg("v"), self.reg("q"));
            self.emit(&format!("{p} = getelementptr @{}, {idx}", src.base));
            self.emit(&format!("{v} = load {p}"));
            self.emit(&format!("{q} = getelementptr @{}, {idx}", dst.base));
            self.emit(&format!("store {v}, {q}"));
        }
        let (i, head, exit) = self.open_loop(1);
        let (im, ip) = (self.reg("im"), self.reg("ip"));
        self.emit(&format!("{im} = sub {i}, 1"));
        self.emit(&format!("{ip} = add {i}, 1"));
        let mut vals = Vec::new();
        for idx in [&im, &i, &ip] {
            let p = self.reg("p");
            let v = self.reg("v");
            self.emit(&format!("{p} = getelementptr @{}, {idx}", src.base));
            self.emit(&format!("{v} = load {p}"));
            vals.push(v);
        }
        let (s1, s2) = (self.reg("s"), self.reg("s"));
        let q = self.reg("q");
        match src.elem {
            Elem::Int => {
                self.emit(&format!("{s1} = add {}, {}", vals[0], vals[2]));
                self.emit(&format!("{s2} = sub {s1}, {}", vals[1]));
            }
            Elem::Float => {
                self.emit(&format!("{s1} = fadd {}, {}", vals[0], vals[2]));
                self.emit(&format!("{s2} = fmul {s1}, 0.5"));
            }
        }
        self.emit(&format!("{q} = getelementptr @{}, {i}", dst.base));
        self.emit(&format!("store {s2}, {q}"));
        self.close_loop(&i, 1, &head, &exit);
    }

    fn branch(&mut self) {
        let a = self.pick_array();
        let (cnt, acc) = (
            self.reg("cnt"),
            self.reg(if a.elem == Elem::Int { "acc" } else { "facc" }),
        );
        self.emit(&format!("{cnt} = add 0, 0"));
        match a.elem {
            Elem::Int => self.emit(&format!("{acc} = add 0, 0")),
            Elem::Float => self.emit(&format!("{acc} = fadd 0.0, 0.0")),
        }
        let (i, head, exit) = self.open_loop(0);
        let p = self.reg("p");
        let v = self.reg("v");
        let c = self.reg("c");
        self.emit(&format!("{p} = getelementptr @{}, {i}", a.base));
        self.emit(&format!("{v} = load {p}"));
        match a.elem {
            Elem::Int => {
                let t = self.small(2, 20);
                self.emit(&format!("{c} = icmp $sgt, {v}, {t}"));
            }
            Elem::Float => self.emit(&format!("{c} = fcmp $ogt, {v}, 1.0")),
        }
        if self.chance(0.5) {
            let t = self.reg("t");
            match a.elem {
                Elem::Int => {
                    self.emit(&format!("{t} = select {c}, {v}, 0"));
                    self.emit(&format!("{acc} = add {acc}, {t}"));
                }
                Elem::Float => {
                    self.emit(&format!("{t} = select {c}, {v}, 0.0"));
                    self.emit(&format!("{acc} = fadd {acc}, {t}"));
                }
            }
            self.emit(&format!("{cnt} = add {cnt}, 1"));
        } else {
            let (yes, join) = (self.label("yes"), self.label("join"));
            let no = self.label("no");
            self.emit(&format!("br_cond {c}, ${yes}, ${no}"));
            self.block(&yes);
            self.emit(&format!("{cnt} = add {cnt}, 1"));
            self.emit(&format!("br ${join}"));
            self.block(&no);
            match a.elem {
                Elem::Int => self.emit(&format!("{acc} = add {acc}, {v}")),
                Elem::Float => self.emit(&format!("{acc} = fadd {acc}, {v}")),
            }
            self.block(&join);
        }
        self.close_loop(&i, 0, &head, &exit);
        self.ints.push(cnt);
        match a.elem {
            Elem::Int => self.ints.push(acc),
            Elem::Float => self.floats.push(acc),
        }
    }

    /// Links a ring of pointers, then walks it and gathers values from an
    /// existing array through the decoded positions.
    fn chase(&mut self) {
        let data = self.pick_array();
        // holds pointers, so later phases must not read it as data
        let ring = self.fresh_region();
        let step = self.small(1, 3);
        let (i, head, exit) = self.open_loop(0);
        let (j, j2, q, p) = (self.reg("j"), self.reg("j"), self.reg("q"), self.reg("p"));
        self.emit(&format!("{j} = add {i}, {step}"));
        self.emit(&format!("{j2} = srem {j}, %n"));
        self.emit(&format!("{q} = getelementptr @{}, {j2}", ring));
        self.emit(&format!("{p} = getelementptr @{}, {i}", ring));
        self.emit(&format!("store {q}, {p}"));
        self.close_loop(&i, 0, &head, &exit);

        let cur = self.reg("cur");
        let acc = self.reg(if data.elem == Elem::Int {
            "acc"
        } else {
            "facc"
        });
        self.emit(&format!("{cur} = getelementptr @{}, 0", ring));
        match data.elem {
            Elem::Int => self.emit(&format!("{acc} = add 0, 0")),
            Elem::Float => self.emit(&format!("{acc} = fadd 0.0, 0.0")),
        }
        let (k, head, exit) = self.open_loop(0);
        let (raw, off, dp, dv) = (
            self.reg("raw"),
            self.reg("off"),
            self.reg("dp"),
            self.reg("dv"),
        );
        self.emit(&format!("{cur} = load {cur}"));
        self.emit(&format!("{raw} = bitcast {cur}"));
        self.emit(&format!("{off} = sub {raw}, {}", ring));
        self.emit(&format!("{dp} = getelementptr @{}, {off}", data.base));
        self.emit(&format!("{dv} = load {dp}"));
        match data.elem {
            Elem::Int => {
                self.emit(&format!("{acc} = add {acc}, {dv}"));
                self.ints.push(acc);
            }
            Elem::Float => {
                self.emit(&format!("{acc} = fadd {acc}, {dv}"));
                self.floats.push(acc);
            }
        }
        self.close_loop(&k, 0, &head, &exit);
    }

    /// Straight-line arithmetic over the scalars produced so far.
    fn chain(&mut self) {
        let len = self.small(3, 10);
        for _ in 0..len {
            let use_float = !self.floats.is_empty() && self.chance(0.4);
            if use_float {
                let a = self.floats.choose(&mut self.rng).unwrap().clone();
                let r = self.reg("f");
                match self.small(0, 3) {
                    0 => {
                        let t = self.reg("t");
                        self.emit(&format!("{t} = call $fabs, {a}"));
                        self.emit(&format!("{r} = call $sqrt, {t}"));
                    }
                    1 => {
                        let t = self.reg("t");
                        self.emit(&format!("{t} = fptrunc {a}"));
                        self.emit(&format!("{r} = fpext {t}"));
                    }
                    _ => {
                        let op = *FLOAT_OPS.choose(&mut self.rng).unwrap();
                        self.emit(&format!("{r} = {op} {a}, %s"));
                    }
                }
                self.floats.push(r);
            } else {
                let a = self
                    .ints
                    .choose(&mut self.rng)
                    .cloned()
                    .unwrap_or_else(|| "%n".into());
                let r = self.reg("r");
                match self.small(0, 4) {
                    0 => {
                        let d = self.small(2, 5);
                        self.emit(&format!("{r} = sdiv {a}, {d}"));
                    }
                    1 => {
                        let t = self.reg("t");
                        self.emit(&format!("{t} = trunc {a}, 16"));
                        self.emit(&format!("{r} = sext {t}, 16"));
                    }
                    _ => {
                        let op = *INT_OPS.choose(&mut self.rng).unwrap();
                        self.emit(&format!("{r} = {op} {a}, %m"));
                    }
                }
                self.ints.push(r);
            }
        }
    }

    /// Folds a random subset of the scalars into the declared outputs.
    fn finish(&mut self) -> Vec<(&'static str, Elem)> {
        let mut outputs = Vec::new();
        let ints: Vec<String> = self.ints.clone();
        let floats: Vec<String> = self.floats.clone();
        let keep = |b: &mut Self, v: &[String]| -> Vec<String> {
            let mut kept: Vec<String> = v.iter().filter(|_| b.chance(0.8)).cloned().collect();
            if kept.is_empty() {
                kept.extend(v.last().cloned());
            }
            kept
        };
        let ki = keep(self, &ints);
        let kf = keep(self, &floats);
        if !ki.is_empty() {
            self.emit(&format!("%ri = add {}, 0", ki[0]));
            for r in &ki[1..] {
                let op = if self.chance(0.7) { "add" } else { "xor" };
                self.emit(&format!("%ri = {op} %ri, {r}"));
            }
            outputs.push(("ri", Elem::Int));
        }
        if !kf.is_empty() {
            self.emit(&format!("%rf = fadd {}, 0.0", kf[0]));
            for r in &kf[1..] {
                self.emit(&format!("%rf = fadd %rf, {r}"));
            }
            outputs.push(("rf", Elem::Float));
        }
        if outputs.is_empty() {
            self.emit("%ri = add %n, %m");
            outputs.push(("ri", Elem::Int));
        }
        for (name, _) in &outputs {
            self.emit(&format!("output %{name}"));
        }
        self.emit("halt");
        outputs
    }
}

/// Kernel `index` of the corpus seeded with `seed`.
pub fn generate_kernel(seed: u64, index: usize) -> Kernel {
    let rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index as u64));
    let mut b = Builder {
        rng,
        body: String::new(),
        loops: Vec::new(),
        labels: 0,
        regs: 0,
        arrays: Vec::new(),
        regions: 0,
        ints: Vec::new(),
        floats: Vec::new(),
    };
    b.block("entry");
    let mut phases = vec!["fill"];
    b.fill();
    let extra = b.small(1, 4);
    for _ in 0..extra {
        let phase = *[
            "fill", "reduce", "reduce", "stencil", "branch", "chase", "chain",
        ]
        .choose(&mut b.rng)
        .unwrap();
        match phase {
            "fill" => b.fill(),
            "reduce" => b.reduce(),
            "stencil" => b.stencil(),
            "branch" => b.branch(),
            "chase" => b.chase(),
            _ => b.chain(),
        }
        phases.push(phase);
    }
    let outputs = b.finish();

    let n = b.small(3, 12);
    let m = b.small(1, 255);
    let s = f64::from(b.small(1, 16)) * 0.25;
    let name = format!("k{index:04}");
    let mut program = format!("; generated kernel {name}: {}\n", phases.join(" "));
    program.push_str(".input %n i32\n.input %m i32\n.input %s f64\n");
    for (o, elem) in &outputs {
        let kind = if *elem == Elem::Int { "i32" } else { "f64" };
        writeln!(program, ".output %{o} {kind}").unwrap();
    }
    for l in &b.loops {
        writeln!(program, ".loop {l}").unwrap();
    }
    program.push_str(&b.body);
    let inputs = format!("%n = {n}\n%m = {m}\n%s = {s:?}\n");
    Kernel {
        name,
        phases,
        program,
        inputs,
    }
}

/// `count` kernels seeded with `seed`.
pub fn generate_corpus(seed: u64, count: usize) -> Vec<Kernel> {
    (0..count).map(|i| generate_kernel(seed, i)).collect()
}
