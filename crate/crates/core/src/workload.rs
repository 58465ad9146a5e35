//! Seeded synthetic workloads.
//!
//! Programs are built from loops over basic blocks. The trace is produced by
//! executing the loops, and profile frequencies and CFG edge counts are read
//! back from the trace, so every generated `(Program, Trace)` pair is
//! consistent by construction.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{CfgEdge, Instruction, OpClass, Program, Region, RegionId, Trace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Archetype {
    /// Irregular gathers over a large vertex array in parallel loops, with a
    /// small serial update block per loop.
    GraphIrregular,
    /// Parallel sequential sweeps over arrays larger than the cache.
    StreamingMemory,
    /// Serial, instruction-parallel arithmetic over a tiny footprint.
    ComputeDense,
    /// A compute phase and an irregular-memory phase inside one function.
    MixedPhase,
    /// Hashing plus probes into a cache-resident table.
    HashjoinLike,
    /// Parallel dense layers streaming weights, with serial activations.
    MlpLike,
}

impl Archetype {
    pub const ALL: [Archetype; 6] = [
        Archetype::GraphIrregular,
        Archetype::StreamingMemory,
        Archetype::ComputeDense,
        Archetype::MixedPhase,
        Archetype::HashjoinLike,
        Archetype::MlpLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::GraphIrregular => "graph-irregular",
            Archetype::StreamingMemory => "streaming-memory",
            Archetype::ComputeDense => "compute-dense",
            Archetype::MixedPhase => "mixed-phase",
            Archetype::HashjoinLike => "hashjoin-like",
            Archetype::MlpLike => "mlp-like",
        }
    }

    pub fn from_name(s: &str) -> Option<Archetype> {
        Archetype::ALL.into_iter().find(|a| a.name() == s)
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadSpec {
    pub archetype: Archetype,
    pub region_count: usize,
    pub seed: u64,
    /// Probability that a memory instruction targets the cross-region shared pool.
    pub sharing_density: f64,
}

impl WorkloadSpec {
    pub fn new(archetype: Archetype, region_count: usize, seed: u64) -> Self {
        WorkloadSpec { archetype, region_count, seed, sharing_density: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadError {
    NoRegions,
    SharingDensity(f64),
    TooManyRegions { requested: usize, max: usize },
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::NoRegions => f.write_str("region count must be at least 1"),
            WorkloadError::SharingDensity(d) => write!(f, "sharing density must lie in [0, 1], got {d}"),
            WorkloadError::TooManyRegions { requested, max } => {
                write!(f, "requested {requested} regions, at most {max} supported")
            }
        }
    }
}

impl core::error::Error for WorkloadError {}

const LINE: u64 = 64;
const SHARED_POOL_LINES: u64 = 8;

#[derive(Debug, Clone, Copy)]
enum AddrGen {
    Fixed(u64),
    /// `base + k * step` on the k-th execution.
    Stride {
        base: u64,
        step: u64,
    },
    /// A random line in `[base, base + lines * 64)` on every execution.
    Random {
        base: u64,
        lines: u64,
    },
}

struct Block {
    function: String,
    parallel: Option<u64>,
    instructions: Vec<Instruction>,
    /// One generator per memory instruction, in order.
    addrs: Vec<AddrGen>,
}

struct Builder {
    rng: ChaCha8Rng,
    blocks: Vec<Block>,
    events: Vec<TraceEvent>,
    executions: Vec<u64>,
    next_base: u64,
    shared_base: u64,
    sharing: f64,
}

impl Builder {
    fn new(seed: u64, sharing: f64) -> Self {
        let mut b = Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            blocks: Vec::new(),
            events: Vec::new(),
            executions: Vec::new(),
            next_base: 0x1000,
            shared_base: 0,
            sharing,
        };
        b.shared_base = b.alloc(SHARED_POOL_LINES);
        b
    }

    /// Reserves `lines` cache lines of fresh address space.
    fn alloc(&mut self, lines: u64) -> u64 {
        let base = self.next_base;
        self.next_base += (lines + 1) * LINE;
        base
    }

    /// Occasionally redirects a memory reference into the shared pool.
    fn maybe_shared(&mut self, gen: AddrGen) -> AddrGen {
        if self.sharing > 0.0 && self.rng.gen_bool(self.sharing) {
            AddrGen::Fixed(self.shared_base + self.rng.gen_range(0..SHARED_POOL_LINES) * LINE)
        } else {
            gen
        }
    }

    fn push(&mut self, block: Block) -> usize {
        self.blocks.push(block);
        self.executions.push(0);
        self.blocks.len() - 1
    }

    fn address(&mut self, gen: AddrGen, k: u64) -> u64 {
        match gen {
            AddrGen::Fixed(a) => a,
            AddrGen::Stride { base, step } => base + k * step,
            AddrGen::Random { base, lines } => base + self.rng.gen_range(0..lines) * LINE,
        }
    }

    fn execute(&mut self, block: usize) {
        let k = self.executions[block];
        self.executions[block] += 1;
        let gens = self.blocks[block].addrs.clone();
        let addrs = gens.into_iter().map(|g| self.address(g, k)).collect();
        self.events.push(TraceEvent { region: RegionId(block as u32 + 1), addrs });
    }

    fn run_loop(&mut self, body: &[usize], iterations: u64) {
        for _ in 0..iterations {
            for &b in body {
                self.execute(b);
            }
        }
    }

    fn finish(self) -> (Program, Trace) {
        let regions: Vec<Region> = self
            .blocks
            .into_iter()
            .zip(&self.executions)
            .enumerate()
            .map(|(i, (block, &freq))| {
                // Static addresses are those of the first execution.
                let mut gens = block.addrs.iter();
                let instructions = block
                    .instructions
                    .into_iter()
                    .map(|mut inst| {
                        if inst.op.is_memory() {
                            inst.mem = Some(match *gens.next().expect("generator per memory op") {
                                AddrGen::Fixed(a) => a,
                                AddrGen::Stride { base, .. } | AddrGen::Random { base, .. } => base,
                            });
                        }
                        inst
                    })
                    .collect();
                let mut region = Region::block(i as u32 + 1, block.function, freq).with_instructions(instructions);
                if let Some(trip) = block.parallel {
                    region = region.with_parallel(trip);
                }
                region
            })
            .collect();
        let mut counts: BTreeMap<(RegionId, RegionId), u64> = BTreeMap::new();
        for w in self.events.windows(2) {
            *counts.entry((w[0].region, w[1].region)).or_default() += 1;
        }
        let edges = counts.into_iter().map(|((from, to), count)| CfgEdge { from, to, count }).collect();
        let entry = self.events.first().map_or(RegionId(1), |e| e.region);
        let program = Program::new(regions, edges, entry).expect("generated program is valid");
        let trace = Trace::new(self.events, &program).expect("generated trace matches profile");
        (program, trace)
    }

    fn mem(&mut self, op: OpClass, gen: AddrGen) -> (Instruction, AddrGen) {
        let gen = self.maybe_shared(gen);
        (Instruction::new(op).with_mem(0), gen)
    }
}

/// Instruction list under construction for one block.
struct Body {
    id: usize,
    temps: usize,
    insts: Vec<Instruction>,
    addrs: Vec<AddrGen>,
}

impl Body {
    fn new(id: usize) -> Self {
        Body { id, temps: 0, insts: Vec::new(), addrs: Vec::new() }
    }

    fn temp(&mut self) -> String {
        self.temps += 1;
        format!("t{}_{}", self.id, self.temps)
    }

    fn op(&mut self, op: OpClass, srcs: &[&str]) -> String {
        let dst = self.temp();
        let inst = srcs.iter().fold(Instruction::new(op).with_dst(dst.clone()), |i, s| i.with_src(*s));
        self.insts.push(inst);
        dst
    }

    fn op_into(&mut self, op: OpClass, dst: &str, srcs: &[&str]) {
        let inst = srcs.iter().fold(Instruction::new(op).with_dst(dst), |i, s| i.with_src(*s));
        self.insts.push(inst);
    }

    fn load(&mut self, b: &mut Builder, gen: AddrGen, addr_src: Option<&str>) -> String {
        let dst = self.temp();
        let (mut inst, gen) = b.mem(OpClass::Load, gen);
        inst.dst = Some(dst.clone());
        if let Some(s) = addr_src {
            inst.srcs.push(String::from(s));
        }
        self.insts.push(inst);
        self.addrs.push(gen);
        dst
    }

    fn store(&mut self, b: &mut Builder, gen: AddrGen, value: &str) {
        let (inst, gen) = b.mem(OpClass::Store, gen);
        self.insts.push(inst.with_src(value));
        self.addrs.push(gen);
    }

    fn branch(&mut self, src: &str) {
        self.insts.push(Instruction::new(OpClass::Branch).with_src(src));
    }

    fn finish(self, b: &mut Builder, function: &str, parallel: Option<u64>) -> usize {
        b.push(Block { function: String::from(function), parallel, instructions: self.insts, addrs: self.addrs })
    }
}

/// Many independent shallow arithmetic chains rooted at the loop index,
/// plus one or two table lookups folded in at the end. At least 8 compute
/// instructions and at most 2 memory instructions, so arithmetic intensity
/// is at least 4 and a wide core has plenty of instruction-level parallelism.
fn compute_block(b: &mut Builder, function: &str, index: &str, table: u64) -> usize {
    let mut body = Body::new(b.blocks.len() + 1);
    body.op_into(OpClass::IntAlu, index, &[index]);
    let loads = b.rng.gen_range(1..=2);
    let mut seeds = Vec::new();
    for _ in 0..loads {
        let line = b.rng.gen_range(0..4);
        seeds.push(body.load(b, AddrGen::Fixed(table + line * LINE), Some(index)));
    }
    let chains = b.rng.gen_range(4..=6);
    let mut tails = Vec::new();
    for _ in 0..chains {
        let mut v = String::from(index);
        for _ in 0..2 {
            let op = *[OpClass::IntAlu, OpClass::IntAlu, OpClass::Move, OpClass::FpAdd]
                .choose(&mut b.rng)
                .expect("non-empty");
            v = body.op(op, &[&v]);
        }
        tails.push(v);
    }
    tails.extend(seeds);
    let mut combined = tails[0].clone();
    for t in &tails[1..] {
        combined = body.op(OpClass::IntAlu, &[&combined, t]);
    }
    body.branch(&combined);
    body.finish(b, function, None)
}

/// Index load, dependent random gathers over a large array, optional
/// scattered store. Arithmetic intensity below 1.
fn gather_block(
    b: &mut Builder,
    function: &str,
    index: &str,
    out: &str,
    edges: u64,
    vertices: u64,
    trip: Option<u64>,
) -> usize {
    let mut body = Body::new(b.blocks.len() + 1);
    let nbr = body.load(b, AddrGen::Stride { base: edges, step: LINE }, Some(index));
    let val = body.load(b, AddrGen::Random { base: vertices, lines: 1 << 16 }, Some(&nbr));
    let w = body.load(b, AddrGen::Random { base: vertices, lines: 1 << 16 }, Some(&nbr));
    body.op_into(OpClass::FpAdd, out, &[&val, &w]);
    if b.rng.gen_bool(0.5) {
        body.store(b, AddrGen::Random { base: vertices, lines: 1 << 16 }, out);
    }
    body.branch(out);
    body.finish(b, function, trip)
}

/// Serial bookkeeping that consumes the gathered values: frontier update,
/// loop-index increment. Compute only.
fn update_block(b: &mut Builder, function: &str, index: &str, inputs: &[String], acc: &str) -> usize {
    let mut body = Body::new(b.blocks.len() + 1);
    for x in inputs {
        body.op_into(OpClass::FpAdd, acc, &[acc, x]);
    }
    let t = body.op(OpClass::IntAlu, &[index]);
    let c = body.op(OpClass::IntAlu, &[&t, acc]);
    body.op_into(OpClass::IntAlu, index, &[index]);
    body.branch(&c);
    body.finish(b, function, None)
}

/// Two unit-stride input arrays, one unit-stride output.
fn stream_block(b: &mut Builder, function: &str, index: &str, trip: Option<u64>) -> usize {
    let (src_a, src_b, dst) = (b.alloc(4096), b.alloc(4096), b.alloc(4096));
    let mut body = Body::new(b.blocks.len() + 1);
    body.op_into(OpClass::IntAlu, index, &[index]);
    let x = body.load(b, AddrGen::Stride { base: src_a, step: LINE }, Some(index));
    let y = body.load(b, AddrGen::Stride { base: src_b, step: LINE }, Some(index));
    let s = body.op(OpClass::FpAdd, &[&x, &y]);
    body.store(b, AddrGen::Stride { base: dst, step: LINE }, &s);
    body.branch(index);
    body.finish(b, function, trip)
}

/// Multiplicative hash, then two probes into a cache-resident table.
fn probe_block(b: &mut Builder, function: &str, index: &str, table: u64) -> usize {
    let keys = b.alloc(1);
    let mut body = Body::new(b.blocks.len() + 1);
    body.op_into(OpClass::IntAlu, index, &[index]);
    let key = body.load(b, AddrGen::Fixed(keys), Some(index));
    let h1 = body.op(OpClass::IntAlu, &[&key]);
    let h2 = body.op(OpClass::IntAlu, &[&key]);
    let h3 = body.op(OpClass::IntAlu, &[&h1, &h2]);
    let h4 = body.op(OpClass::IntAlu, &[&h3]);
    let slot = body.op(OpClass::Move, &[&h4]);
    let bucket = body.load(b, AddrGen::Random { base: table, lines: 256 }, Some(&slot));
    let hit = body.op(OpClass::IntAlu, &[&bucket, &key]);
    let _ = body.op(OpClass::IntAlu, &[&hit]);
    body.branch(&hit);
    body.finish(b, function, None)
}

/// Weight streaming multiply-accumulate.
fn dense_block(b: &mut Builder, function: &str, index: &str, acc: &str, trip: Option<u64>) -> usize {
    let weights = b.alloc(4096);
    let mut body = Body::new(b.blocks.len() + 1);
    body.op_into(OpClass::IntAlu, index, &[index]);
    let w0 = body.load(b, AddrGen::Stride { base: weights, step: LINE }, Some(index));
    let w1 = body.load(b, AddrGen::Stride { base: weights + LINE / 2, step: LINE }, Some(index));
    let p0 = body.op(OpClass::FpMul, &[&w0, acc]);
    let p1 = body.op(OpClass::FpMul, &[&w1, acc]);
    body.op_into(OpClass::FpAdd, acc, &[acc, &p0]);
    body.op_into(OpClass::FpAdd, acc, &[acc, &p1]);
    body.branch(index);
    body.finish(b, function, trip)
}

/// Serial polynomial activation over an accumulator.
fn activation_block(b: &mut Builder, function: &str, acc: &str) -> usize {
    let mut body = Body::new(b.blocks.len() + 1);
    let sq = body.op(OpClass::FpMul, &[acc, acc]);
    let c = body.op(OpClass::FpAdd, &[acc, &sq]);
    let d = body.op(OpClass::FpMul, &[&c, acc]);
    let e = body.op(OpClass::Move, &[acc]);
    let f = body.op(OpClass::FpAdd, &[&d, &e]);
    body.op_into(OpClass::FpAdd, acc, &[&f, &c]);
    body.branch(acc);
    body.finish(b, function, None)
}

/// Splits `total` blocks into loop bodies of 2..=4 blocks (a remainder of 1
/// is allowed when `total` is 1).
fn loop_sizes(rng: &mut ChaCha8Rng, total: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = total;
    while left > 0 {
        let n = if left <= 4 { left } else { rng.gen_range(2..=4).min(left - 2).max(2) };
        sizes.push(n);
        left -= n;
    }
    sizes
}

pub const MAX_REGIONS: usize = 4096;

/// Builds a workload of the given archetype.
pub fn generate(spec: &WorkloadSpec) -> Result<(Program, Trace), WorkloadError> {
    if spec.region_count == 0 {
        return Err(WorkloadError::NoRegions);
    }
    if spec.region_count > MAX_REGIONS {
        return Err(WorkloadError::TooManyRegions { requested: spec.region_count, max: MAX_REGIONS });
    }
    if !(0.0..=1.0).contains(&spec.sharing_density) {
        return Err(WorkloadError::SharingDensity(spec.sharing_density));
    }
    let mut b = Builder::new(spec.seed, spec.sharing_density);
    let n = spec.region_count;
    match spec.archetype {
        Archetype::GraphIrregular => {
            let sizes = loop_sizes(&mut b.rng, n);
            let kernels = build_gather_loops(&mut b, &sizes, "kernel", 0);
            let rounds = 2;
            for _ in 0..rounds {
                for (body, iters) in &kernels {
                    b.run_loop(body, *iters);
                }
            }
        }
        Archetype::StreamingMemory => {
            let sizes = loop_sizes(&mut b.rng, n);
            let mut loops = Vec::new();
            for (l, &size) in sizes.iter().enumerate() {
                let function = format!("sweep{l}");
                let index = format!("i{l}");
                let iters = 64;
                let body: Vec<usize> =
                    (0..size).map(|_| stream_block(&mut b, &function, &index, Some(iters))).collect();
                loops.push((body, iters));
            }
            for (body, iters) in &loops {
                b.run_loop(body, *iters);
            }
        }
        Archetype::ComputeDense => {
            let sizes = loop_sizes(&mut b.rng, n);
            let mut loops = Vec::new();
            for (l, &size) in sizes.iter().enumerate() {
                let function = format!("compute{l}");
                let index = format!("i{l}");
                let table = b.alloc(4);
                let body: Vec<usize> = (0..size).map(|_| compute_block(&mut b, &function, &index, table)).collect();
                loops.push((body, b.rng.gen_range(32..=96)));
            }
            for (body, iters) in &loops {
                b.run_loop(body, *iters);
            }
        }
        Archetype::MixedPhase => {
            let compute_n = (n / 2).max(1);
            let memory_n = n - compute_n;
            let table = b.alloc(4);
            let mut compute_loops = Vec::new();
            for (l, size) in loop_sizes(&mut b.rng, compute_n).into_iter().enumerate() {
                let index = format!("c{l}");
                let body: Vec<usize> = (0..size).map(|_| compute_block(&mut b, "main", &index, table)).collect();
                compute_loops.push((body, b.rng.gen_range(96..=160)));
            }
            let memory_loops = if memory_n > 0 {
                let sizes = loop_sizes(&mut b.rng, memory_n);
                build_gather_loops(&mut b, &sizes, "main", compute_loops.len())
            } else {
                Vec::new()
            };
            for _ in 0..2 {
                for (body, iters) in compute_loops.iter().chain(&memory_loops) {
                    b.run_loop(body, *iters);
                }
            }
        }
        Archetype::HashjoinLike => {
            let sizes = loop_sizes(&mut b.rng, n);
            let table = b.alloc(256);
            let mut loops = Vec::new();
            for (l, &size) in sizes.iter().enumerate() {
                let function = format!("probe{l}");
                let index = format!("i{l}");
                let body: Vec<usize> = (0..size).map(|_| probe_block(&mut b, &function, &index, table)).collect();
                loops.push((body, 64));
            }
            for (body, iters) in &loops {
                b.run_loop(body, *iters);
            }
        }
        Archetype::MlpLike => {
            let sizes = loop_sizes(&mut b.rng, n);
            let mut loops = Vec::new();
            for (l, &size) in sizes.iter().enumerate() {
                let function = format!("layer{l}");
                let index = format!("i{l}");
                let acc = format!("acc{l}");
                let iters = 64;
                let mut body: Vec<usize> = (0..size.saturating_sub(1).max(1))
                    .map(|_| dense_block(&mut b, &function, &index, &acc, Some(iters)))
                    .collect();
                if size > 1 {
                    body.push(activation_block(&mut b, &function, &acc));
                }
                loops.push((body, iters));
            }
            for (body, iters) in &loops {
                b.run_loop(body, *iters);
            }
        }
    }
    Ok(b.finish())
}

/// Loops of parallel gathers closed by one serial update block.
fn build_gather_loops(
    b: &mut Builder,
    sizes: &[usize],
    function_prefix: &str,
    index_offset: usize,
) -> Vec<(Vec<usize>, u64)> {
    let mut loops = Vec::new();
    for (l, &size) in sizes.iter().enumerate() {
        let vertices = b.alloc(1 << 16);
        let function = if function_prefix == "main" { String::from("main") } else { format!("{function_prefix}{l}") };
        let id = l + index_offset;
        let index = format!("v{id}");
        let acc = format!("acc{id}");
        let iters = 64;
        let edges = b.alloc(4 * iters);
        let gathers = if size > 1 { size - 1 } else { 1 };
        let outs: Vec<String> = (0..gathers).map(|g| format!("x{id}_{g}")).collect();
        let mut body: Vec<usize> =
            outs.iter().map(|out| gather_block(b, &function, &index, out, edges, vertices, Some(iters))).collect();
        if size > 1 {
            body.push(update_block(b, &function, &index, &outs, &acc));
        }
        loops.push((body, iters));
    }
    loops
}

/// Uniformly random small program for property tests: 1..=8 instructions per
/// region drawn from all classes, registers and cache lines from small shared
/// pools, random parallel annotations and a random loop nest.
pub fn random_program(seed: u64, region_count: usize) -> (Program, Trace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = region_count.clamp(1, 12);
    let mut b = Builder::new(rng.gen(), 0.0);
    let functions = rng.gen_range(1..=3usize);
    for r in 0..n {
        let len = rng.gen_range(1..=8);
        let mut insts = Vec::new();
        let mut addrs = Vec::new();
        for _ in 0..len {
            let op = OpClass::ALL[rng.gen_range(0..8)];
            let mut inst = Instruction::new(op);
            if !matches!(op, OpClass::Store | OpClass::Branch) {
                inst = inst.with_dst(format!("r{}", rng.gen_range(0..8)));
            }
            for _ in 0..rng.gen_range(0..=2) {
                inst = inst.with_src(format!("r{}", rng.gen_range(0..8)));
            }
            if op.is_memory() {
                inst = inst.with_mem(0);
                addrs.push(if rng.gen_bool(0.5) {
                    let line = rng.gen_range(0..SHARED_POOL_LINES);
                    AddrGen::Fixed(b.shared_base + line * LINE + 8 * rng.gen_range(0..8))
                } else {
                    AddrGen::Stride { base: b.alloc(64), step: LINE }
                });
            }
            insts.push(inst);
        }
        let parallel = rng.gen_bool(0.25).then(|| [8, 16, 32, 64, 128][rng.gen_range(0..5)]);
        let function = format!("f{}", r * functions / n);
        b.push(Block { function, parallel, instructions: insts, addrs });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut loops = Vec::new();
    while !order.is_empty() {
        let take = rng.gen_range(1..=3).min(order.len());
        let body: Vec<usize> = order.drain(..take).collect();
        loops.push((body, rng.gen_range(1..=16u64)));
    }
    for _ in 0..rng.gen_range(1..=3) {
        for (body, iters) in &loops {
            b.run_loop(body, *iters);
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, MachineModel};

    #[test]
    fn generation_is_deterministic() {
        for a in Archetype::ALL {
            let spec = WorkloadSpec::new(a, 10, 7);
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
        assert_eq!(random_program(3, 9), random_program(3, 9));
    }

    #[test]
    fn region_counts_match_spec() {
        for a in Archetype::ALL {
            for n in [1, 2, 3, 5, 11, 24] {
                let (p, t) = generate(&WorkloadSpec::new(a, n, 1)).unwrap();
                assert_eq!(p.len(), n, "{a} with {n} regions");
                assert!(p.regions().iter().all(|r| r.frequency >= 1));
                p.check_profile_bound().unwrap();
                assert!(!t.is_empty());
            }
        }
    }

    #[test]
    fn compute_dense_intensity() {
        let (p, _) = generate(&WorkloadSpec::new(Archetype::ComputeDense, 16, 5)).unwrap();
        for m in analyze(&p, &MachineModel::cpu(), &MachineModel::pim(), None) {
            assert!(m.arithmetic_intensity > 3.0, "{m:?}");
        }
    }

    #[test]
    fn spec_validation() {
        assert_eq!(generate(&WorkloadSpec::new(Archetype::MlpLike, 0, 1)), Err(WorkloadError::NoRegions));
        let mut spec = WorkloadSpec::new(Archetype::MlpLike, 4, 1);
        spec.sharing_density = 1.5;
        assert!(matches!(generate(&spec), Err(WorkloadError::SharingDensity(_))));
    }

    #[test]
    fn random_programs_are_valid() {
        for seed in 0..200 {
            let (p, t) = random_program(seed, 1 + (seed as usize % 12));
            p.check_profile_bound().unwrap();
            assert_eq!(t.len() as u64, p.regions().iter().map(|r| r.frequency).sum::<u64>());
        }
    }

    #[test]
    fn archetype_names() {
        for a in Archetype::ALL {
            assert_eq!(Archetype::from_name(a.name()), Some(a));
        }
    }
}
