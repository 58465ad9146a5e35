//! Time-overhead model of a CPU/PIM schedule.
//!
//! The total is the execution time of every region on its assigned side plus
//! two switching terms: cache-line data movement (a flush at the side that
//! last held the line and a fetch at the side that touches it next) and a
//! fixed context-switch charge for every control transfer that crosses
//! sides.
//!
//! All switching terms are reduced to integer event counts before they are
//! converted to nanoseconds, so two routes that agree on the counts produce
//! bit-identical breakdowns.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::analysis::{MachineModel, RegionMetrics, Side};
use crate::cluster::{pair_reuse, ClusterSet};
use crate::ir::{Program, RegionId, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct CostConfig {
    /// Cost of one cache-line flush or fetch issued by the CPU.
    pub cl_flush_fetch_cpu_ns: f64,
    /// Cost of one cache-line flush or fetch issued by a PIM core.
    pub cl_flush_fetch_pim_ns: f64,
    /// Line transfers charged per cross-side transition that carries registers.
    pub register_dm_lines: u64,
    pub context_switch_cycles: u64,
    pub clock_ghz: f64,
    pub cache_line_bytes: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            cl_flush_fetch_cpu_ns: 60.0,
            cl_flush_fetch_pim_ns: 30.0,
            register_dm_lines: 2,
            context_switch_cycles: 800,
            clock_ghz: 3.0,
            cache_line_bytes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostError {
    InvalidConfig(&'static str),
    MissingMetrics(RegionId),
    ScheduleLength { expected: usize, found: usize },
}

impl fmt::Display for CostError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostError::InvalidConfig(what) => write!(f, "invalid cost configuration: {what} must be positive"),
            CostError::MissingMetrics(id) => write!(f, "no metrics for region {id}"),
            CostError::ScheduleLength { expected, found } => {
                write!(f, "schedule covers {found} regions, program has {expected}")
            }
        }
    }
}

impl core::error::Error for CostError {}

impl CostConfig {
    pub fn validate(&self) -> Result<(), CostError> {
        let checks = [
            (self.cl_flush_fetch_cpu_ns > 0.0, "cl_flush_fetch_cpu_ns"),
            (self.cl_flush_fetch_pim_ns > 0.0, "cl_flush_fetch_pim_ns"),
            (self.register_dm_lines > 0, "register_dm_lines"),
            (self.context_switch_cycles > 0, "context_switch_cycles"),
            (self.clock_ghz > 0.0, "clock_ghz"),
            (self.cache_line_bytes > 0, "cache_line_bytes"),
        ];
        match checks.into_iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(CostError::InvalidConfig(what)),
            None => Ok(()),
        }
    }

    fn flush_fetch_ns(&self, side: Side) -> f64 {
        match side {
            Side::Cpu => self.cl_flush_fetch_cpu_ns,
            Side::Pim => self.cl_flush_fetch_pim_ns,
        }
    }

    /// Flush at `from` plus fetch at `to`.
    pub fn transfer_ns(&self, from: Side, to: Side) -> f64 {
        self.flush_fetch_ns(from) + self.flush_fetch_ns(to)
    }

    /// One cross-side control transfer.
    pub fn switch_ns(&self) -> f64 {
        self.context_switch_cycles as f64 / self.clock_ghz
    }
}

/// Side of every region, indexed like [`Program::regions`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    sides: Vec<Side>,
}

impl Schedule {
    pub fn new(sides: Vec<Side>) -> Self {
        Schedule { sides }
    }

    pub fn uniform(program: &Program, side: Side) -> Self {
        Schedule { sides: vec![side; program.len()] }
    }

    /// Lifts a per-cluster assignment to regions.
    pub fn from_clusters(clusters: &ClusterSet, cluster_sides: &[Side], regions: usize) -> Self {
        Schedule { sides: (0..regions).map(|r| cluster_sides[clusters.cluster_of(r)]).collect() }
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn side(&self, region: usize) -> Side {
        self.sides[region]
    }

    pub fn flipped(&self) -> Schedule {
        Schedule { sides: self.sides.iter().map(|s| s.other()).collect() }
    }

    /// Assignment spelled as `C`/`P` characters in region order.
    pub fn code(&self) -> alloc::string::String {
        self.sides.iter().map(|s| if *s == Side::Cpu { 'C' } else { 'P' }).collect()
    }
}

impl core::ops::Add for TransferCounts {
    type Output = TransferCounts;

    fn add(self, other: TransferCounts) -> TransferCounts {
        TransferCounts {
            cpu_to_pim: self.cpu_to_pim + other.cpu_to_pim,
            pim_to_cpu: self.pim_to_cpu + other.pim_to_cpu,
        }
    }
}

/// Cache-line transfers by direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct TransferCounts {
    pub cpu_to_pim: u64,
    pub pim_to_cpu: u64,
}

impl TransferCounts {
    fn record(&mut self, from: Side, to: Side, n: u64) {
        match (from, to) {
            (Side::Cpu, Side::Pim) => self.cpu_to_pim += n,
            (Side::Pim, Side::Cpu) => self.pim_to_cpu += n,
            _ => {}
        }
    }

    pub fn total(&self) -> u64 {
        self.cpu_to_pim + self.pim_to_cpu
    }

    pub fn ns(&self, cfg: &CostConfig) -> f64 {
        self.cpu_to_pim as f64 * cfg.transfer_ns(Side::Cpu, Side::Pim)
            + self.pim_to_cpu as f64 * cfg.transfer_ns(Side::Pim, Side::Cpu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub exec_ns: f64,
    pub cl_dm_ns: f64,
    pub cxt_ns: f64,
    pub total_ns: f64,
}

impl CostBreakdown {
    pub fn new(exec_ns: f64, cl_dm_ns: f64, cxt_ns: f64) -> Self {
        CostBreakdown { exec_ns, cl_dm_ns, cxt_ns, total_ns: exec_ns + cl_dm_ns + cxt_ns }
    }

    fn from_counts(exec_ns: f64, transfers: TransferCounts, crossings: u64, cfg: &CostConfig) -> Self {
        let cxt = (crossings * cfg.context_switch_cycles) as f64 / cfg.clock_ghz;
        CostBreakdown::new(exec_ns, transfers.ns(cfg), cxt)
    }
}

/// Walks the trace in order and counts every touch of a cache line from the
/// side opposite to the one that touched it last.
pub fn line_transfers(trace: &Trace, schedule: &Schedule, line_bytes: u64) -> TransferCounts {
    let mut holder: BTreeMap<u64, Side> = BTreeMap::new();
    let mut counts = TransferCounts::default();
    for (region, addrs) in trace.indexed() {
        let side = schedule.side(region);
        for &addr in addrs {
            if let Some(prev) = holder.insert(addr / line_bytes, side) {
                counts.record(prev, side, 1);
            }
        }
    }
    counts
}

fn shared_lines(program: &Program, a: usize, b: usize, line_bytes: u64) -> u64 {
    let lines = |i: usize| -> alloc::collections::BTreeSet<u64> {
        program.regions()[i].instructions.iter().filter_map(|inst| inst.mem).map(|m| m / line_bytes).collect()
    };
    lines(a).intersection(&lines(b)).count() as u64
}

/// Trace-free estimate: each cross-side CFG transition moves every cache line
/// both endpoint regions reference statically.
pub fn static_line_transfers(program: &Program, schedule: &Schedule, line_bytes: u64) -> TransferCounts {
    let mut counts = TransferCounts::default();
    for (from, to, count) in program.indexed_edges() {
        if from != to {
            let n = count * shared_lines(program, from, to, line_bytes);
            counts.record(schedule.side(from), schedule.side(to), n);
        }
    }
    counts
}

/// Register-carried dependencies: every cross-side CFG transition between
/// regions that share a register spills and reloads through
/// `register_dm_lines` cache-line transfers.
pub fn register_transfers(program: &Program, schedule: &Schedule, cfg: &CostConfig) -> TransferCounts {
    let mut counts = TransferCounts::default();
    for (from, to, count) in program.indexed_edges() {
        if from != to && shares_registers(program, from, to) {
            counts.record(schedule.side(from), schedule.side(to), count * cfg.register_dm_lines);
        }
    }
    counts
}

fn shares_registers(program: &Program, a: usize, b: usize) -> bool {
    pair_reuse(&program.regions()[a], &program.regions()[b]).register_reuse >= 1
}

/// Data-movement cost in ns: trace-driven line transfers (or the static
/// estimate when no trace is available) plus register transfers.
pub fn cl_dm_cost(program: &Program, trace: Option<&Trace>, schedule: &Schedule, cfg: &CostConfig) -> f64 {
    data_movement(program, trace, schedule, cfg).ns(cfg)
}

fn data_movement(program: &Program, trace: Option<&Trace>, schedule: &Schedule, cfg: &CostConfig) -> TransferCounts {
    let lines = match trace {
        Some(t) => line_transfers(t, schedule, cfg.cache_line_bytes),
        None => static_line_transfers(program, schedule, cfg.cache_line_bytes),
    };
    lines + register_transfers(program, schedule, cfg)
}

/// Control-transfer graph between scheduling units. Intra-unit transitions
/// are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SwitchGraph {
    pub units: usize,
    /// `(from unit, to unit, transitions)`, sorted.
    pub edges: Vec<(usize, usize, u64)>,
}

impl SwitchGraph {
    pub fn new(program: &Program, clusters: &ClusterSet) -> SwitchGraph {
        let mut summed: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (from, to, count) in program.indexed_edges() {
            let (a, b) = (clusters.cluster_of(from), clusters.cluster_of(to));
            if a != b {
                *summed.entry((a, b)).or_default() += count;
            }
        }
        SwitchGraph { units: clusters.len(), edges: summed.into_iter().map(|((a, b), w)| (a, b, w)).collect() }
    }

    /// Region-level graph (every region its own unit).
    pub fn of_regions(program: &Program) -> SwitchGraph {
        let mut summed: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (from, to, count) in program.indexed_edges() {
            if from != to {
                *summed.entry((from, to)).or_default() += count;
            }
        }
        SwitchGraph { units: program.len(), edges: summed.into_iter().map(|((a, b), w)| (a, b, w)).collect() }
    }

    pub fn crossings(&self, unit_sides: &[Side]) -> u64 {
        self.edges.iter().filter(|&&(a, b, _)| unit_sides[a] != unit_sides[b]).map(|&(_, _, w)| w).sum()
    }
}

pub fn context_switch_cost(graph: &SwitchGraph, unit_sides: &[Side], cfg: &CostConfig) -> f64 {
    (graph.crossings(unit_sides) * cfg.context_switch_cycles) as f64 / cfg.clock_ghz
}

/// Time in ns of all executions of one region on `side`. Parallel-capable
/// regions on PIM are split across `min(trip count, cores)` cores.
pub fn region_exec_ns(
    frequency: u64,
    trip_count: u64,
    metrics: &RegionMetrics,
    side: Side,
    model: &MachineModel,
) -> f64 {
    let cycles = frequency * metrics.cycles.get(side) + metrics.misses * u64::from(model.miss_penalty);
    let serial = cycles as f64 / model.clock_ghz;
    if side == Side::Pim && metrics.parallel_capable {
        serial / trip_count.min(u64::from(model.cores)).max(1) as f64
    } else {
        serial
    }
}

/// Everything a schedule is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub program: &'a Program,
    pub trace: Option<&'a Trace>,
    pub metrics: &'a [RegionMetrics],
    pub cpu: &'a MachineModel,
    pub pim: &'a MachineModel,
    pub cost: &'a CostConfig,
}

impl CostContext<'_> {
    pub fn model(&self, side: Side) -> &MachineModel {
        match side {
            Side::Cpu => self.cpu,
            Side::Pim => self.pim,
        }
    }

    fn check(&self, schedule: &Schedule) -> Result<(), CostError> {
        for (i, r) in self.program.regions().iter().enumerate() {
            if self.metrics.get(i).map(|m| m.region) != Some(r.id) {
                return Err(CostError::MissingMetrics(r.id));
            }
        }
        if schedule.sides.len() != self.program.len() {
            return Err(CostError::ScheduleLength { expected: self.program.len(), found: schedule.sides.len() });
        }
        Ok(())
    }

    fn region_ns(&self, i: usize, side: Side) -> f64 {
        let r = &self.program.regions()[i];
        region_exec_ns(r.frequency, r.trip_count, &self.metrics[i], side, self.model(side))
    }
}

/// Sum of per-region execution time on the assigned sides, in region order.
pub fn exec_cost(ctx: &CostContext<'_>, schedule: &Schedule) -> Result<f64, CostError> {
    ctx.check(schedule)?;
    Ok((0..ctx.program.len()).map(|i| ctx.region_ns(i, schedule.side(i))).sum())
}

/// Full breakdown; `total_ns` is exactly the sum of the three terms.
pub fn total_cost(ctx: &CostContext<'_>, schedule: &Schedule) -> Result<CostBreakdown, CostError> {
    let exec = exec_cost(ctx, schedule)?;
    let moves = data_movement(ctx.program, ctx.trace, schedule, ctx.cost);
    let crossings = SwitchGraph::of_regions(ctx.program).crossings(schedule.sides());
    Ok(CostBreakdown::from_counts(exec, moves, crossings, ctx.cost))
}

/// Precomputed per-region and per-pair terms for evaluating many schedules
/// of the same program. Produces the same breakdowns as [`total_cost`].
#[derive(Debug, Clone)]
pub struct CostTables {
    exec: Vec<[f64; 2]>,
    /// `(from region, to region, line transfers if the sides differ)`.
    transfers: Vec<(usize, usize, u64)>,
    switches: SwitchGraph,
    cost: CostConfig,
}

impl CostTables {
    pub fn new(ctx: &CostContext<'_>) -> Result<CostTables, CostError> {
        ctx.check(&Schedule::uniform(ctx.program, Side::Cpu))?;
        let exec = (0..ctx.program.len()).map(|i| [ctx.region_ns(i, Side::Cpu), ctx.region_ns(i, Side::Pim)]).collect();

        let mut pairs: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        match ctx.trace {
            Some(trace) => {
                let mut last: BTreeMap<u64, usize> = BTreeMap::new();
                for (region, addrs) in trace.indexed() {
                    for &addr in addrs {
                        if let Some(prev) = last.insert(addr / ctx.cost.cache_line_bytes, region) {
                            if prev != region {
                                *pairs.entry((prev, region)).or_default() += 1;
                            }
                        }
                    }
                }
            }
            None => {
                for (from, to, count) in ctx.program.indexed_edges() {
                    if from != to {
                        let n = count * shared_lines(ctx.program, from, to, ctx.cost.cache_line_bytes);
                        *pairs.entry((from, to)).or_default() += n;
                    }
                }
            }
        }
        for (from, to, count) in ctx.program.indexed_edges() {
            if from != to && shares_registers(ctx.program, from, to) {
                *pairs.entry((from, to)).or_default() += count * ctx.cost.register_dm_lines;
            }
        }
        Ok(CostTables {
            exec,
            transfers: pairs.into_iter().filter(|&(_, n)| n > 0).map(|((a, b), n)| (a, b, n)).collect(),
            switches: SwitchGraph::of_regions(ctx.program),
            cost: ctx.cost.clone(),
        })
    }

    pub fn regions(&self) -> usize {
        self.exec.len()
    }

    pub fn exec_ns(&self, region: usize, side: Side) -> f64 {
        self.exec[region][side as usize]
    }

    pub fn evaluate(&self, sides: &[Side]) -> CostBreakdown {
        let exec: f64 = sides.iter().enumerate().map(|(i, &s)| self.exec[i][s as usize]).sum();
        let mut moves = TransferCounts::default();
        for &(a, b, n) in &self.transfers {
            moves.record(sides[a], sides[b], n);
        }
        CostBreakdown::from_counts(exec, moves, self.switches.crossings(sides), &self.cost)
    }
}
