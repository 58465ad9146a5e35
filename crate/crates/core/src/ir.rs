//! Program representation: instructions, regions, control-flow profile and
//! dynamic memory traces.
//!
//! A [`Program`] is validated on construction and immutable afterwards. Region
//! ids are user-visible integers; most analyses address regions by their
//! position in [`Program::regions`] instead, which is stable for the lifetime
//! of the program.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

/// Instruction classes understood by the analyzer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OpClass {
    IntAlu,
    FpAdd,
    FpMul,
    Div,
    Load,
    Store,
    Branch,
    Move,
}

impl OpClass {
    pub const ALL: [OpClass; 8] = [
        OpClass::IntAlu,
        OpClass::FpAdd,
        OpClass::FpMul,
        OpClass::Div,
        OpClass::Load,
        OpClass::Store,
        OpClass::Branch,
        OpClass::Move,
    ];

    /// Mnemonic used by the textual IR.
    pub fn mnemonic(self) -> &'static str {
        match self {
            OpClass::IntAlu => "ialu",
            OpClass::FpAdd => "fadd",
            OpClass::FpMul => "fmul",
            OpClass::Div => "div",
            OpClass::Load => "load",
            OpClass::Store => "store",
            OpClass::Branch => "br",
            OpClass::Move => "mov",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<OpClass> {
        OpClass::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub fn is_memory(self) -> bool {
        matches!(self, OpClass::Load | OpClass::Store)
    }

    /// Compute classes count toward the arithmetic-intensity numerator.
    /// Branches are neither compute nor memory.
    pub fn is_compute(self) -> bool {
        matches!(self, OpClass::IntAlu | OpClass::FpAdd | OpClass::FpMul | OpClass::Div | OpClass::Move)
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for OpClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub op: OpClass,
    pub dst: Option<String>,
    pub srcs: Vec<String>,
    /// Symbolic byte address, present exactly for loads and stores.
    pub mem: Option<u64>,
}

impl Instruction {
    pub fn new(op: OpClass) -> Self {
        Instruction { op, dst: None, srcs: Vec::new(), mem: None }
    }

    pub fn with_dst(mut self, reg: impl Into<String>) -> Self {
        self.dst = Some(reg.into());
        self
    }

    pub fn with_src(mut self, reg: impl Into<String>) -> Self {
        self.srcs.push(reg.into());
        self
    }

    pub fn with_mem(mut self, addr: u64) -> Self {
        self.mem = Some(addr);
        self
    }

    /// Every register name this instruction reads or writes, with repetition.
    pub fn registers(&self) -> impl Iterator<Item = &str> {
        self.dst.iter().chain(self.srcs.iter()).map(String::as_str)
    }

    /// Validates the memory-reference and destination rules for the opcode.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.op.is_memory() != self.mem.is_some() {
            return Err(if self.op.is_memory() {
                "load/store without a memory reference"
            } else {
                "memory reference on a non-memory instruction"
            });
        }
        if matches!(self.op, OpClass::Store | OpClass::Branch) && self.dst.is_some() {
            return Err("store and branch instructions take no destination register");
        }
        Ok(())
    }
}

/// User-visible region identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionKind {
    BasicBlock,
    Function,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub kind: RegionKind,
    pub instructions: Vec<Instruction>,
    pub function: String,
    /// Profiled execution count.
    pub frequency: u64,
    pub parallel: bool,
    /// Iterations of the enclosing parallel loop; 0 when not parallel.
    pub trip_count: u64,
}

impl Region {
    pub fn block(id: u32, function: impl Into<String>, frequency: u64) -> Self {
        Region {
            id: RegionId(id),
            kind: RegionKind::BasicBlock,
            instructions: Vec::new(),
            function: function.into(),
            frequency,
            parallel: false,
            trip_count: 0,
        }
    }

    pub fn with_instructions(mut self, instructions: Vec<Instruction>) -> Self {
        self.instructions = instructions;
        self
    }

    pub fn with_parallel(mut self, trip_count: u64) -> Self {
        self.parallel = true;
        self.trip_count = trip_count;
        self
    }

    pub fn mem_ops(&self) -> usize {
        self.instructions.iter().filter(|i| i.op.is_memory()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CfgEdge {
    pub from: RegionId,
    pub to: RegionId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrError {
    DuplicateRegion(RegionId),
    DanglingEdge { from: RegionId, to: RegionId },
    UnknownEntry(RegionId),
    EmptyRegion(RegionId),
    EmptyProgram,
    BadInstruction { region: RegionId, index: usize, reason: &'static str },
    ProfileBound { region: RegionId, outgoing: u64, bound: u64 },
    UnknownTraceRegion(RegionId),
    FrequencyMismatch { region: RegionId, expected: u64, found: u64 },
}

impl fmt::Display for IrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IrError::DuplicateRegion(id) => write!(f, "duplicate region id {id}"),
            IrError::DanglingEdge { from, to } => {
                write!(f, "edge {from} -> {to} references an undefined region")
            }
            IrError::UnknownEntry(id) => write!(f, "entry region {id} is not defined"),
            IrError::EmptyRegion(id) => write!(f, "region {id} has no instructions"),
            IrError::EmptyProgram => f.write_str("program has no regions"),
            IrError::BadInstruction { region, index, reason } => {
                write!(f, "region {region}, instruction {index}: {reason}")
            }
            IrError::ProfileBound { region, outgoing, bound } => {
                write!(f, "region {region}: outgoing transition count {outgoing} exceeds bound {bound}")
            }
            IrError::UnknownTraceRegion(id) => write!(f, "trace references unknown region {id}"),
            IrError::FrequencyMismatch { region, expected, found } => {
                write!(f, "region {region}: trace has {found} events but profile frequency is {expected}")
            }
        }
    }
}

impl core::error::Error for IrError {}

/// A validated program. Construct with [`Program::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    regions: Vec<Region>,
    edges: Vec<CfgEdge>,
    entry: RegionId,
    index: BTreeMap<RegionId, usize>,
}

impl Program {
    /// Validates structure: unique ids, non-empty regions, well-formed
    /// instructions, edges and entry referencing existing regions.
    pub fn new(regions: Vec<Region>, edges: Vec<CfgEdge>, entry: RegionId) -> Result<Self, IrError> {
        if regions.is_empty() {
            return Err(IrError::EmptyProgram);
        }
        let mut index = BTreeMap::new();
        for (pos, region) in regions.iter().enumerate() {
            if index.insert(region.id, pos).is_some() {
                return Err(IrError::DuplicateRegion(region.id));
            }
            if region.instructions.is_empty() {
                return Err(IrError::EmptyRegion(region.id));
            }
            for (i, inst) in region.instructions.iter().enumerate() {
                inst.check().map_err(|reason| IrError::BadInstruction { region: region.id, index: i, reason })?;
            }
        }
        for e in &edges {
            if !index.contains_key(&e.from) || !index.contains_key(&e.to) {
                return Err(IrError::DanglingEdge { from: e.from, to: e.to });
            }
        }
        if !index.contains_key(&entry) {
            return Err(IrError::UnknownEntry(entry));
        }
        Ok(Program { regions, edges, entry, index })
    }

    /// Checks the profile sanity bound: the outgoing transition counts of a
    /// region never exceed its frequency times its number of successors.
    pub fn check_profile_bound(&self) -> Result<(), IrError> {
        let mut outgoing: BTreeMap<RegionId, (u64, BTreeSet<RegionId>)> = BTreeMap::new();
        for e in &self.edges {
            let entry = outgoing.entry(e.from).or_default();
            entry.0 = entry.0.saturating_add(e.count);
            entry.1.insert(e.to);
        }
        for (id, (sum, succ)) in outgoing {
            let freq = self.regions[self.index[&id]].frequency;
            let bound = freq.saturating_mul(succ.len() as u64);
            if sum > bound {
                return Err(IrError::ProfileBound { region: id, outgoing: sum, bound });
            }
        }
        Ok(())
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn edges(&self) -> &[CfgEdge] {
        &self.edges
    }

    pub fn entry(&self) -> RegionId {
        self.entry
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn index_of(&self, id: RegionId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn region(&self, id: RegionId) -> Option<&Region> {
        self.index_of(id).map(|i| &self.regions[i])
    }

    pub fn instruction_count(&self) -> usize {
        self.regions.iter().map(|r| r.instructions.len()).sum()
    }

    /// CFG edges as `(from index, to index, count)`.
    pub fn indexed_edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.edges.iter().map(|e| (self.index[&e.from], self.index[&e.to], e.count))
    }

    /// A copy with every frequency and transition count multiplied by `k`.
    pub fn scale_profile(&self, k: u64) -> Program {
        let mut scaled = self.clone();
        for r in &mut scaled.regions {
            r.frequency *= k;
        }
        for e in &mut scaled.edges {
            e.count *= k;
        }
        scaled
    }

    /// Function names in order of their lowest-indexed block, with the
    /// region indices that belong to each.
    pub fn functions(&self) -> Vec<(String, Vec<usize>)> {
        let mut order: Vec<(String, Vec<usize>)> = Vec::new();
        let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
        let mut sorted: Vec<usize> = (0..self.regions.len()).collect();
        sorted.sort_by_key(|&i| self.regions[i].id);
        for i in sorted {
            let name = self.regions[i].function.as_str();
            match by_name.get(name) {
                Some(&slot) => order[slot].1.push(i),
                None => {
                    by_name.insert(name, order.len());
                    order.push((String::from(name), alloc::vec![i]));
                }
            }
        }
        order
    }
}

/// Collapses basic blocks into one region per function.
///
/// Function regions take the smallest member block id. Instructions are
/// concatenated in block-id order, frequency and trip count are the member
/// maxima, and the parallel flag is their OR. Intra-function edges are
/// dropped; inter-function edge counts are summed.
pub fn coarsen_to_functions(program: &Program) -> Program {
    if program.regions.iter().all(|r| r.kind == RegionKind::Function) {
        return program.clone();
    }
    let groups = program.functions();
    let mut owner = alloc::vec![RegionId(0); program.len()];
    let mut regions = Vec::with_capacity(groups.len());
    for (name, members) in &groups {
        let id = program.regions[members[0]].id;
        let mut coarse = Region {
            id,
            kind: RegionKind::Function,
            instructions: Vec::new(),
            function: name.clone(),
            frequency: 0,
            parallel: false,
            trip_count: 0,
        };
        for &m in members {
            let r = &program.regions[m];
            owner[m] = id;
            coarse.instructions.extend(r.instructions.iter().cloned());
            coarse.frequency = coarse.frequency.max(r.frequency);
            coarse.parallel |= r.parallel;
            coarse.trip_count = coarse.trip_count.max(r.trip_count);
        }
        regions.push(coarse);
    }
    let mut summed: BTreeMap<(RegionId, RegionId), u64> = BTreeMap::new();
    for (from, to, count) in program.indexed_edges() {
        let (a, b) = (owner[from], owner[to]);
        if a != b {
            *summed.entry((a, b)).or_default() += count;
        }
    }
    let edges = summed.into_iter().map(|((from, to), count)| CfgEdge { from, to, count }).collect();
    let entry = owner[program.index[&program.entry]];
    Program::new(regions, edges, entry).expect("coarsening preserves program validity")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub region: RegionId,
    /// Byte addresses touched during this dynamic execution, in order.
    pub addrs: Vec<u64>,
}

/// Dynamic execution record, validated against a [`Program`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    events: Vec<TraceEvent>,
    /// Region index of each event.
    positions: Vec<usize>,
}

impl Trace {
    /// Every event must name an existing region and every region must occur
    /// exactly `frequency` times.
    pub fn new(events: Vec<TraceEvent>, program: &Program) -> Result<Self, IrError> {
        let mut counts = alloc::vec![0u64; program.len()];
        let mut positions = Vec::with_capacity(events.len());
        for ev in &events {
            let idx = program.index_of(ev.region).ok_or(IrError::UnknownTraceRegion(ev.region))?;
            counts[idx] += 1;
            positions.push(idx);
        }
        for (region, &found) in program.regions.iter().zip(&counts) {
            if found != region.frequency {
                return Err(IrError::FrequencyMismatch { region: region.id, expected: region.frequency, found });
            }
        }
        Ok(Trace { events, positions })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `(region index, addresses)` for each event in order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, &[u64])> + '_ {
        self.positions.iter().copied().zip(self.events.iter().map(|e| e.addrs.as_slice()))
    }

    /// Counts of adjacent `(from, to)` region pairs in execution order.
    pub fn transition_counts(&self) -> BTreeMap<(RegionId, RegionId), u64> {
        let mut out = BTreeMap::new();
        for pair in self.events.windows(2) {
            *out.entry((pair[0].region, pair[1].region)).or_default() += 1;
        }
        out
    }
}
