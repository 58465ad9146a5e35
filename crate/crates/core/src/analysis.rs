//! Static per-region characteristics: a throughput/critical-path cycle
//! estimate, load-store port pressure and arithmetic intensity.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::cache::MissProfile;
use crate::ir::{OpClass, Program, Region, RegionId};

/// Execution target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    #[serde(rename = "CPU")]
    Cpu,
    #[serde(rename = "PIM")]
    Pim,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Cpu => Side::Pim,
            Side::Pim => Side::Cpu,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Cpu => "CPU",
            Side::Pim => "PIM",
        })
    }
}

/// A value per execution target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PerSide<T> {
    pub cpu: T,
    pub pim: T,
}

impl<T: Copy> PerSide<T> {
    pub fn get(&self, side: Side) -> T {
        match side {
            Side::Cpu => self.cpu,
            Side::Pim => self.pim,
        }
    }
}

/// Cycles per instruction class, indexed in [`OpClass::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyTable(pub [u32; 8]);

impl LatencyTable {
    pub fn get(&self, op: OpClass) -> u32 {
        self.0[op.index()]
    }

    pub fn set(&mut self, op: OpClass, cycles: u32) {
        self.0[op.index()] = cycles;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineModel {
    pub side: Side,
    pub issue_width: u32,
    pub ls_ports: u32,
    pub latency: LatencyTable,
    /// Cycles charged per last-level miss.
    pub miss_penalty: u32,
    pub clock_ghz: f64,
    pub cores: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    ZeroIssueWidth,
    ZeroPorts,
    ZeroLatency(OpClass),
    NonPositiveClock,
    ZeroCores,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ZeroIssueWidth => f.write_str("issue width must be at least 1"),
            ModelError::ZeroPorts => f.write_str("load-store port count must be at least 1"),
            ModelError::ZeroLatency(op) => write!(f, "latency of {op} must be at least 1"),
            ModelError::NonPositiveClock => f.write_str("clock frequency must be positive"),
            ModelError::ZeroCores => f.write_str("core count must be at least 1"),
        }
    }
}

impl core::error::Error for ModelError {}

impl MachineModel {
    /// Out-of-order host core: 3 GHz, 4-wide, one core, 60 ns line fetch.
    pub fn cpu() -> Self {
        MachineModel {
            side: Side::Cpu,
            issue_width: 4,
            ls_ports: 2,
            // ialu fadd fmul div load store br mov
            latency: LatencyTable([1, 3, 4, 20, 4, 1, 1, 1]),
            miss_penalty: 180,
            clock_ghz: 3.0,
            cores: 1,
        }
    }

    /// In-order near-memory cores: single issue, 32 cores, 30 ns line fetch.
    pub fn pim() -> Self {
        MachineModel {
            side: Side::Pim,
            issue_width: 1,
            ls_ports: 1,
            latency: LatencyTable([1, 3, 4, 20, 2, 1, 1, 1]),
            miss_penalty: 90,
            clock_ghz: 3.0,
            cores: 32,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.issue_width == 0 {
            return Err(ModelError::ZeroIssueWidth);
        }
        if self.ls_ports == 0 {
            return Err(ModelError::ZeroPorts);
        }
        if let Some(op) = OpClass::ALL.into_iter().find(|&op| self.latency.get(op) == 0) {
            return Err(ModelError::ZeroLatency(op));
        }
        if self.clock_ghz.is_nan() || self.clock_ghz <= 0.0 {
            return Err(ModelError::NonPositiveClock);
        }
        if self.cores == 0 {
            return Err(ModelError::ZeroCores);
        }
        Ok(())
    }
}

/// Longest latency-weighted path through the register dependency DAG.
///
/// An instruction depends on the most recent earlier writer of each of its
/// source registers. Registers live on entry are ready at cycle 0.
pub fn critical_path(region: &Region, model: &MachineModel) -> u64 {
    let mut ready: BTreeMap<&str, u64> = BTreeMap::new();
    let mut longest = 0;
    for inst in &region.instructions {
        let start = inst.srcs.iter().filter_map(|s| ready.get(s.as_str()).copied()).max().unwrap_or(0);
        let done = start + u64::from(model.latency.get(inst.op));
        if let Some(dst) = &inst.dst {
            ready.insert(dst.as_str(), done);
        }
        longest = longest.max(done);
    }
    longest
}

fn base_cycles(region: &Region, model: &MachineModel) -> u64 {
    let uops = region.instructions.len() as u64;
    let mem = region.mem_ops() as u64;
    uops.div_ceil(u64::from(model.issue_width))
        .max(mem.div_ceil(u64::from(model.ls_ports)))
        .max(critical_path(region, model))
}

/// Cycles for one execution of `region`, plus `misses` last-level misses.
pub fn estimate_cycles(region: &Region, model: &MachineModel, misses: u64) -> u64 {
    base_cycles(region, model) + misses * u64::from(model.miss_penalty)
}

/// Fraction of the estimated cycles the load-store ports are busy, in `[0, 1]`.
pub fn port_pressure(region: &Region, model: &MachineModel) -> f64 {
    let mem = region.mem_ops();
    if mem == 0 {
        return 0.0;
    }
    let cycles = estimate_cycles(region, model, 0);
    let busy = mem as f64 / f64::from(model.ls_ports);
    (busy / cycles as f64).min(1.0)
}

fn op_mix(region: &Region) -> (usize, usize) {
    let compute = region.instructions.iter().filter(|i| i.op.is_compute()).count();
    (compute, region.mem_ops())
}

/// Compute instructions per memory instruction; branches count as neither.
pub fn arithmetic_intensity(region: &Region) -> f64 {
    let (compute, mem) = op_mix(region);
    compute as f64 / mem.max(1) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMetrics {
    pub region: RegionId,
    pub uops: u64,
    pub mem_ops: u64,
    pub compute_ops: u64,
    pub critical_path: PerSide<u64>,
    /// Cycles per execution, excluding miss penalties.
    pub cycles: PerSide<u64>,
    pub port_pressure: PerSide<f64>,
    pub arithmetic_intensity: f64,
    pub parallel_capable: bool,
    /// Total last-level misses over all executions, when a miss profile was supplied.
    pub misses: u64,
}

impl RegionMetrics {
    pub fn compute(region: &Region, cpu: &MachineModel, pim: &MachineModel, misses: u64) -> RegionMetrics {
        let (compute, mem) = op_mix(region);
        RegionMetrics {
            region: region.id,
            uops: region.instructions.len() as u64,
            mem_ops: mem as u64,
            compute_ops: compute as u64,
            critical_path: PerSide { cpu: critical_path(region, cpu), pim: critical_path(region, pim) },
            cycles: PerSide { cpu: base_cycles(region, cpu), pim: base_cycles(region, pim) },
            port_pressure: PerSide { cpu: port_pressure(region, cpu), pim: port_pressure(region, pim) },
            arithmetic_intensity: arithmetic_intensity(region),
            parallel_capable: region.parallel && region.trip_count >= u64::from(pim.cores),
            misses,
        }
    }
}

/// One [`RegionMetrics`] per region, in program order.
pub fn analyze(
    program: &Program,
    cpu: &MachineModel,
    pim: &MachineModel,
    misses: Option<&MissProfile>,
) -> Vec<RegionMetrics> {
    program
        .regions()
        .iter()
        .enumerate()
        .map(|(i, r)| RegionMetrics::compute(r, cpu, pim, misses.map_or(0, |m| m.misses[i])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Instruction, Program};
    use alloc::format;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn independent(op: OpClass, n: usize) -> Vec<Instruction> {
        (0..n)
            .map(|i| {
                let inst = Instruction::new(op);
                match op {
                    OpClass::Load => inst.with_dst(format!("l{i}")).with_mem(i as u64 * 64),
                    OpClass::Store => inst.with_mem(i as u64 * 64),
                    _ => inst.with_dst(format!("r{i}")),
                }
            })
            .collect()
    }

    fn region(instructions: Vec<Instruction>) -> Region {
        Region::block(1, "f", 1).with_instructions(instructions)
    }

    #[test]
    fn four_independent_ialu() {
        let r = region(independent(OpClass::IntAlu, 4));
        assert_eq!(estimate_cycles(&r, &MachineModel::cpu(), 0), 1);
        assert_eq!(estimate_cycles(&r, &MachineModel::pim(), 0), 4);
    }

    #[test]
    fn dependent_fmul_chain() {
        let r = region(vec![
            Instruction::new(OpClass::FpMul).with_dst("a").with_src("x"),
            Instruction::new(OpClass::FpMul).with_dst("b").with_src("a"),
            Instruction::new(OpClass::FpMul).with_dst("c").with_src("b"),
        ]);
        let cpu = MachineModel::cpu();
        assert_eq!(critical_path(&r, &cpu), 12);
        assert_eq!(estimate_cycles(&r, &cpu, 0), 12);
        assert_eq!(estimate_cycles(&r, &cpu, 2), 12 + 360);
    }

    #[test]
    fn redefinition_uses_latest_writer() {
        let r = region(vec![
            Instruction::new(OpClass::Div).with_dst("a"),
            Instruction::new(OpClass::IntAlu).with_dst("a"),
            Instruction::new(OpClass::IntAlu).with_dst("b").with_src("a"),
        ]);
        // b waits on the ialu (1 cycle), not on the div.
        assert_eq!(critical_path(&r, &MachineModel::cpu()), 20);
        let r2 = region(vec![
            Instruction::new(OpClass::IntAlu).with_dst("a"),
            Instruction::new(OpClass::IntAlu).with_dst("b").with_src("a"),
        ]);
        assert_eq!(critical_path(&r2, &MachineModel::cpu()), 2);
    }

    #[test]
    fn pressure_zero_without_memory() {
        let r = region(independent(OpClass::FpAdd, 3));
        assert_eq!(port_pressure(&r, &MachineModel::cpu()), 0.0);
    }

    fn unit_latency(mut m: MachineModel) -> MachineModel {
        m.latency = LatencyTable([1; 8]);
        m
    }

    #[test]
    fn pressure_saturated_loads() {
        // 4 independent loads, 2 ports, estimate 2 cycles -> (4/2)/2.
        let cpu = unit_latency(MachineModel::cpu());
        let r = region(independent(OpClass::Load, 4));
        assert_eq!(estimate_cycles(&r, &cpu, 0), 2);
        assert_eq!(port_pressure(&r, &cpu), 1.0);
        // With the default 4-cycle load latency the critical path dominates.
        assert_eq!(port_pressure(&r, &MachineModel::cpu()), 0.5);
    }

    #[test]
    fn pressure_single_load_among_alu() {
        // 1 load + 8 ialu on a 5-wide, 2-port model: estimate 2 -> (1/2)/2.
        let mut cpu = unit_latency(MachineModel::cpu());
        cpu.issue_width = 5;
        let mut insts = independent(OpClass::IntAlu, 8);
        insts.push(Instruction::new(OpClass::Load).with_dst("l").with_mem(0));
        let r = region(insts);
        assert_eq!(estimate_cycles(&r, &cpu, 0), 2);
        assert_eq!(port_pressure(&r, &cpu), 0.25);
        // Default CPU: max(ceil(9/4), ceil(1/2), 4) = 4 -> (1/2)/4.
        assert_eq!(port_pressure(&r, &MachineModel::cpu()), 0.125);
    }

    #[test]
    fn intensity_rules() {
        let mut insts = independent(OpClass::IntAlu, 6);
        insts.extend(independent(OpClass::Load, 2));
        assert_eq!(arithmetic_intensity(&region(insts)), 3.0);
        assert_eq!(arithmetic_intensity(&region(independent(OpClass::Load, 5))), 0.0);
        let branches = vec![Instruction::new(OpClass::Branch); 3];
        assert_eq!(arithmetic_intensity(&region(branches)), 0.0);
    }

    #[test]
    fn analyze_parallel_threshold() {
        let regions = vec![
            Region::block(1, "f", 1).with_instructions(vec![Instruction::new(OpClass::Move).with_dst("a")]),
            Region::block(2, "f", 1).with_instructions(independent(OpClass::IntAlu, 2)).with_parallel(64),
            Region::block(3, "f", 1).with_instructions(independent(OpClass::IntAlu, 2)).with_parallel(8),
        ];
        let p = Program::new(regions, vec![], crate::ir::RegionId(1)).unwrap();
        let m = analyze(&p, &MachineModel::cpu(), &MachineModel::pim(), None);
        assert_eq!((m[0].uops, m[0].mem_ops), (1, 0));
        assert_eq!(m[0].arithmetic_intensity, 1.0);
        assert!(!m[0].parallel_capable);
        assert!(m[1].parallel_capable);
        assert!(!m[2].parallel_capable);
        assert_eq!(m, analyze(&p, &MachineModel::cpu(), &MachineModel::pim(), None));
    }

    #[test]
    fn default_models_validate() {
        MachineModel::cpu().validate().unwrap();
        MachineModel::pim().validate().unwrap();
        let mut m = MachineModel::cpu();
        m.latency.set(OpClass::Div, 0);
        assert_eq!(m.validate(), Err(ModelError::ZeroLatency(OpClass::Div)));
    }

    fn arb_instruction() -> impl Strategy<Value = Instruction> {
        (0usize..8, 0u8..4, proptest::collection::vec(0u8..4, 0..3), 0u64..8).prop_map(|(op, dst, srcs, addr)| {
            let op = OpClass::ALL[op];
            let mut inst = Instruction::new(op);
            if !matches!(op, OpClass::Store | OpClass::Branch) {
                inst = inst.with_dst(format!("r{dst}"));
            }
            for s in srcs {
                inst = inst.with_src(format!("r{s}"));
            }
            if op.is_memory() {
                inst = inst.with_mem(addr * 8);
            }
            inst
        })
    }

    proptest! {
        #[test]
        fn estimate_is_monotone_under_append(
            insts in proptest::collection::vec(arb_instruction(), 1..12),
            extra in arb_instruction(),
        ) {
            for model in [MachineModel::cpu(), MachineModel::pim()] {
                let before = estimate_cycles(&region(insts.clone()), &model, 0);
                let mut longer = insts.clone();
                longer.push(extra.clone());
                prop_assert!(estimate_cycles(&region(longer), &model, 0) >= before);
            }
        }

        #[test]
        fn pressure_in_unit_interval(insts in proptest::collection::vec(arb_instruction(), 1..16)) {
            let r = region(insts);
            for model in [MachineModel::cpu(), MachineModel::pim()] {
                let p = port_pressure(&r, &model);
                prop_assert!((0.0..=1.0).contains(&p));
                let floor = (r.instructions.len() as u64).div_ceil(u64::from(model.issue_width))
                    .max((r.mem_ops() as u64).div_ceil(u64::from(model.ls_ports)));
                prop_assert!(estimate_cycles(&r, &model, 0) >= floor);
            }
        }

        #[test]
        fn narrow_core_never_faster(insts in proptest::collection::vec(arb_instruction(), 1..16)) {
            let r = region(insts);
            let cpu = MachineModel::cpu();
            let mut pim = MachineModel::pim();
            pim.latency = cpu.latency;
            prop_assert!(estimate_cycles(&r, &pim, 0) >= estimate_cycles(&r, &cpu, 0));
        }
    }
}
