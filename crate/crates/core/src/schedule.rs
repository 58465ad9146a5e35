//! Offloading strategies: the two-stage clustering + classification
//! offloader, and the baselines it is compared against (uniform placement,
//! MPKI threshold, per-region greedy, exhaustive search).

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use serde::Serialize;

use crate::analysis::{analyze, MachineModel, ModelError, RegionMetrics, Side};
use crate::cache::{simulate_cache, CacheConfig, CacheConfigError, MissProfile};
use crate::cluster::{cluster, ClusterSet, ClusteringConfig, ClusteringConfigError};
use crate::cost::{total_cost, CostBreakdown, CostConfig, CostContext, CostError, CostTables, Schedule};
use crate::ir::{coarsen_to_functions, Program, RegionId, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierThresholds {
    /// CPU port pressure at or above which a cluster goes to PIM.
    pub pressure: f64,
    /// Arithmetic intensity below which a cluster counts as memory-intensive.
    pub ai: f64,
    /// MPKI at or above which the MPKI baseline offloads a region.
    pub mpki: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        ClassifierThresholds { pressure: 0.5, ai: 1.0, mpki: 10.0 }
    }
}

/// Units enumerated by the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TubUnits {
    #[default]
    Regions,
    Clusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Granularity {
    #[serde(rename = "bbls")]
    BasicBlocks,
    #[serde(rename = "func")]
    Functions,
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct OffloadConfig {
    pub cpu: MachineModel,
    pub pim: MachineModel,
    pub cost: CostConfig,
    pub cache: CacheConfig,
    pub clustering: ClusteringConfig,
    pub thresholds: ClassifierThresholds,
    pub tub_limit: usize,
    pub tub_units: TubUnits,
}

impl Default for OffloadConfig {
    fn default() -> Self {
        OffloadConfig {
            cpu: MachineModel::cpu(),
            pim: MachineModel::pim(),
            cost: CostConfig::default(),
            cache: CacheConfig::default(),
            clustering: ClusteringConfig::default(),
            thresholds: ClassifierThresholds::default(),
            tub_limit: 20,
            tub_units: TubUnits::Regions,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleError {
    MissingTrace(Strategy),
    UnitLimit { units: usize, limit: usize },
    Threshold(&'static str),
    Model(ModelError),
    Cache(CacheConfigError),
    Clustering(ClusteringConfigError),
    Cost(CostError),
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::MissingTrace(s) => write!(f, "strategy {s} requires a trace"),
            ScheduleError::UnitLimit { units, limit } => {
                write!(f, "exhaustive search over {units} units exceeds the limit of {limit}")
            }
            ScheduleError::Threshold(name) => write!(f, "threshold {name} must be finite and non-negative"),
            ScheduleError::Model(e) => e.fmt(f),
            ScheduleError::Cache(e) => e.fmt(f),
            ScheduleError::Clustering(e) => e.fmt(f),
            ScheduleError::Cost(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for ScheduleError {}

impl From<CostError> for ScheduleError {
    fn from(e: CostError) -> Self {
        ScheduleError::Cost(e)
    }
}

impl OffloadConfig {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        self.cpu.validate().map_err(ScheduleError::Model)?;
        self.pim.validate().map_err(ScheduleError::Model)?;
        self.cost.validate()?;
        self.cache.validate().map_err(ScheduleError::Cache)?;
        self.clustering.validate().map_err(ScheduleError::Clustering)?;
        let th = &self.thresholds;
        for (v, name) in [(th.pressure, "pressure"), (th.ai, "ai"), (th.mpki, "mpki")] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ScheduleError::Threshold(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Strategy {
    #[serde(rename = "cpu-only")]
    CpuOnly,
    #[serde(rename = "pim-only")]
    PimOnly,
    #[serde(rename = "mpki")]
    Mpki,
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "tub")]
    Tub,
    #[serde(rename = "a3pim-bbls")]
    A3pimBbls,
    #[serde(rename = "a3pim-func")]
    A3pimFunc,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::CpuOnly,
        Strategy::PimOnly,
        Strategy::Mpki,
        Strategy::Greedy,
        Strategy::Tub,
        Strategy::A3pimBbls,
        Strategy::A3pimFunc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CpuOnly => "cpu-only",
            Strategy::PimOnly => "pim-only",
            Strategy::Mpki => "mpki",
            Strategy::Greedy => "greedy",
            Strategy::Tub => "tub",
            Strategy::A3pimBbls => "a3pim-bbls",
            Strategy::A3pimFunc => "a3pim-func",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown strategy `{}`", self.0)
    }
}

impl core::error::Error for UnknownStrategy {}

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| UnknownStrategy(String::from(s)))
    }
}

/// Cluster-level inputs to the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterProfile {
    pub parallel_capable: bool,
    /// Port-busy cycles over total cycles on the CPU, frequency weighted.
    pub port_pressure: f64,
    /// Compute over memory instructions, frequency weighted.
    pub arithmetic_intensity: f64,
}

impl ClusterProfile {
    /// Aggregates member metrics. Weights are region frequencies; a cluster
    /// whose members never execute is weighted uniformly.
    pub fn aggregate(program: &Program, metrics: &[RegionMetrics], members: &[usize], cpu: &MachineModel) -> Self {
        let weights: Vec<u64> = members.iter().map(|&m| program.regions()[m].frequency).collect();
        let uniform = weights.iter().all(|&w| w == 0);
        let weight = |k: usize| if uniform { 1 } else { weights[k] };
        let (mut compute, mut mem, mut cycles) = (0u64, 0u64, 0u64);
        for (k, &m) in members.iter().enumerate() {
            let w = weight(k);
            compute += w * metrics[m].compute_ops;
            mem += w * metrics[m].mem_ops;
            cycles += w * metrics[m].cycles.cpu;
        }
        let port_pressure =
            if mem == 0 || cycles == 0 { 0.0 } else { (mem as f64 / f64::from(cpu.ls_ports) / cycles as f64).min(1.0) };
        ClusterProfile {
            parallel_capable: members.iter().any(|&m| metrics[m].parallel_capable),
            port_pressure,
            arithmetic_intensity: compute as f64 / mem.max(1) as f64,
        }
    }
}

/// Priority order: parallelism, then port pressure, then memory intensity.
#[allow(clippy::if_same_then_else)]
pub fn classify_cluster(profile: &ClusterProfile, th: &ClassifierThresholds) -> Side {
    if profile.parallel_capable {
        Side::Pim
    } else if profile.port_pressure >= th.pressure {
        Side::Pim
    } else if profile.arithmetic_intensity < th.ai {
        Side::Pim
    } else {
        Side::Cpu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    /// Scheduling units as region-id groups.
    pub units: Vec<Vec<RegionId>>,
    pub unit_sides: Vec<Side>,
    #[serde(skip)]
    pub schedule: Schedule,
    pub breakdown: CostBreakdown,
}

impl StrategyResult {
    /// `(region id, side)` in program order.
    pub fn assignment(&self, program: &Program) -> Vec<(RegionId, Side)> {
        program.regions().iter().map(|r| r.id).zip(self.schedule.sides().iter().copied()).collect()
    }
}

/// Best schedule found by an exhaustive search over a mask range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubCandidate {
    pub total_ns: f64,
    /// Unit `i` is on PIM iff bit `units - 1 - i` is set, so numeric order
    /// equals lexicographic order of the CPU < PIM assignment string.
    pub mask: u64,
}

impl TubCandidate {
    pub fn better(self, other: TubCandidate) -> TubCandidate {
        match self.total_ns.total_cmp(&other.total_ns).then(self.mask.cmp(&other.mask)) {
            core::cmp::Ordering::Greater => other,
            _ => self,
        }
    }
}

/// Analysis results shared by every strategy for one program.
#[derive(Debug, Clone)]
pub struct Offloader<'a> {
    program: &'a Program,
    trace: Option<&'a Trace>,
    config: &'a OffloadConfig,
    metrics: Vec<RegionMetrics>,
    misses: Option<MissProfile>,
    tables: CostTables,
}

impl<'a> Offloader<'a> {
    pub fn new(
        program: &'a Program,
        trace: Option<&'a Trace>,
        config: &'a OffloadConfig,
    ) -> Result<Self, ScheduleError> {
        config.validate()?;
        let misses = match trace {
            Some(t) => Some(simulate_cache(program, t, &config.cache).map_err(ScheduleError::Cache)?),
            None => None,
        };
        let metrics = analyze(program, &config.cpu, &config.pim, misses.as_ref());
        let ctx =
            CostContext { program, trace, metrics: &metrics, cpu: &config.cpu, pim: &config.pim, cost: &config.cost };
        let tables = CostTables::new(&ctx)?;
        Ok(Offloader { program, trace, config, metrics, misses, tables })
    }

    pub fn program(&self) -> &Program {
        self.program
    }

    pub fn metrics(&self) -> &[RegionMetrics] {
        &self.metrics
    }

    pub fn misses(&self) -> Option<&MissProfile> {
        self.misses.as_ref()
    }

    pub fn tables(&self) -> &CostTables {
        &self.tables
    }

    pub fn context(&self) -> CostContext<'_> {
        CostContext {
            program: self.program,
            trace: self.trace,
            metrics: &self.metrics,
            cpu: &self.config.cpu,
            pim: &self.config.pim,
            cost: &self.config.cost,
        }
    }

    /// Evaluates a unit-level assignment with [`total_cost`].
    pub fn evaluate(
        &self,
        strategy: Strategy,
        units: &ClusterSet,
        unit_sides: Vec<Side>,
    ) -> Result<StrategyResult, ScheduleError> {
        let schedule = Schedule::from_clusters(units, &unit_sides, self.program.len());
        let breakdown = total_cost(&self.context(), &schedule)?;
        Ok(StrategyResult { strategy, units: self.unit_ids(units), unit_sides, schedule, breakdown })
    }

    fn unit_ids(&self, units: &ClusterSet) -> Vec<Vec<RegionId>> {
        units.clusters().iter().map(|c| c.members.iter().map(|&m| self.program.regions()[m].id).collect()).collect()
    }

    pub fn run(&self, strategy: Strategy) -> Result<StrategyResult, ScheduleError> {
        match strategy {
            Strategy::CpuOnly => self.uniform(Side::Cpu),
            Strategy::PimOnly => self.uniform(Side::Pim),
            Strategy::Mpki => self.mpki(),
            Strategy::Greedy => self.greedy(),
            Strategy::Tub => self.tub(),
            Strategy::A3pimBbls => self.a3pim(Granularity::BasicBlocks),
            Strategy::A3pimFunc => self.a3pim(Granularity::Functions),
        }
    }

    pub fn uniform(&self, side: Side) -> Result<StrategyResult, ScheduleError> {
        let units = ClusterSet::singletons(self.program);
        let strategy = if side == Side::Cpu { Strategy::CpuOnly } else { Strategy::PimOnly };
        self.evaluate(strategy, &units, vec![side; units.len()])
    }

    /// Offloads each region whose MPKI reaches the threshold.
    pub fn mpki(&self) -> Result<StrategyResult, ScheduleError> {
        let misses = self.misses.as_ref().ok_or(ScheduleError::MissingTrace(Strategy::Mpki))?;
        let units = ClusterSet::singletons(self.program);
        let sides = units
            .clusters()
            .iter()
            .map(|c| {
                let r = c.members[0];
                if misses.mpki[r] >= self.config.thresholds.mpki {
                    Side::Pim
                } else {
                    Side::Cpu
                }
            })
            .collect();
        self.evaluate(Strategy::Mpki, &units, sides)
    }

    /// Each region on its cheaper side by execution time alone; ties stay on the CPU.
    pub fn greedy(&self) -> Result<StrategyResult, ScheduleError> {
        let units = ClusterSet::singletons(self.program);
        let sides = units
            .clusters()
            .iter()
            .map(|c| {
                let r = c.members[0];
                if self.tables.exec_ns(r, Side::Pim) < self.tables.exec_ns(r, Side::Cpu) {
                    Side::Pim
                } else {
                    Side::Cpu
                }
            })
            .collect();
        self.evaluate(Strategy::Greedy, &units, sides)
    }

    /// Stage-one clusters at basic-block granularity.
    pub fn clusters(&self) -> ClusterSet {
        cluster(self.program, &self.config.clustering, self.trace)
    }

    /// Cluster, then classify every cluster by its intrinsic metrics.
    pub fn a3pim(&self, granularity: Granularity) -> Result<StrategyResult, ScheduleError> {
        match granularity {
            Granularity::BasicBlocks => {
                let clusters = self.clusters();
                let sides = self.classify_all(self.program, &self.metrics, &clusters);
                self.evaluate(Strategy::A3pimBbls, &clusters, sides)
            }
            Granularity::Functions => self.a3pim_functions(),
        }
    }

    fn classify_all(&self, program: &Program, metrics: &[RegionMetrics], clusters: &ClusterSet) -> Vec<Side> {
        clusters
            .clusters()
            .iter()
            .map(|c| {
                let profile = ClusterProfile::aggregate(program, metrics, &c.members, &self.config.cpu);
                classify_cluster(&profile, &self.config.thresholds)
            })
            .collect()
    }

    /// Clusters and classifies function-level regions, then evaluates the
    /// decision on the basic-block program so costs compare like for like.
    fn a3pim_functions(&self) -> Result<StrategyResult, ScheduleError> {
        let coarse = coarsen_to_functions(self.program);
        let coarse_metrics = analyze(&coarse, &self.config.cpu, &self.config.pim, None);
        let coarse_clusters = cluster(&coarse, &self.config.clustering, None);
        let coarse_sides = self.classify_all(&coarse, &coarse_metrics, &coarse_clusters);

        let function_slot: BTreeMap<&str, usize> =
            coarse.regions().iter().enumerate().map(|(i, r)| (r.function.as_str(), i)).collect();
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); coarse_clusters.len()];
        for (i, r) in self.program.regions().iter().enumerate() {
            groups[coarse_clusters.cluster_of(function_slot[r.function.as_str()])].push(i);
        }
        let units = ClusterSet::from_groups(self.program, groups);
        // from_groups orders by smallest block id; carry the sides along.
        let sides = units
            .clusters()
            .iter()
            .map(|c| {
                let fi = function_slot[self.program.regions()[c.members[0]].function.as_str()];
                coarse_sides[coarse_clusters.cluster_of(fi)]
            })
            .collect();
        self.evaluate(Strategy::A3pimFunc, &units, sides)
    }

    /// Units enumerated by [`Offloader::tub`] under the configured unit kind.
    pub fn tub_units(&self) -> ClusterSet {
        match self.config.tub_units {
            TubUnits::Regions => ClusterSet::singletons(self.program),
            TubUnits::Clusters => self.clusters(),
        }
    }

    pub fn check_tub_limit(&self, units: &ClusterSet) -> Result<(), ScheduleError> {
        if units.len() > self.config.tub_limit || units.len() >= 64 {
            return Err(ScheduleError::UnitLimit { units: units.len(), limit: self.config.tub_limit });
        }
        Ok(())
    }

    /// Best assignment among `masks`; `None` for an empty range.
    pub fn tub_search(&self, units: &ClusterSet, masks: Range<u64>) -> Option<TubCandidate> {
        let n = units.len();
        let owner: Vec<usize> = (0..self.program.len()).map(|r| units.cluster_of(r)).collect();
        let mut sides = vec![Side::Cpu; self.program.len()];
        let mut best: Option<TubCandidate> = None;
        for mask in masks {
            for (r, &u) in owner.iter().enumerate() {
                sides[r] = if mask >> (n - 1 - u) & 1 == 1 { Side::Pim } else { Side::Cpu };
            }
            let cand = TubCandidate { total_ns: self.tables.evaluate(&sides).total_ns, mask };
            best = Some(best.map_or(cand, |b| b.better(cand)));
        }
        best
    }

    /// Materializes the result for a mask found by [`Offloader::tub_search`].
    pub fn tub_result(&self, units: &ClusterSet, mask: u64) -> Result<StrategyResult, ScheduleError> {
        let n = units.len();
        let sides = (0..n).map(|u| if mask >> (n - 1 - u) & 1 == 1 { Side::Pim } else { Side::Cpu }).collect();
        self.evaluate(Strategy::Tub, units, sides)
    }

    /// Exhaustive minimum over all `2^units` assignments.
    pub fn tub(&self) -> Result<StrategyResult, ScheduleError> {
        let units = self.tub_units();
        self.check_tub_limit(&units)?;
        let best = self.tub_search(&units, 0..1u64 << units.len()).expect("at least one assignment");
        self.tub_result(&units, best.mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_branch_order() {
        let th = ClassifierThresholds::default();
        let p = |parallel_capable, port_pressure, arithmetic_intensity| ClusterProfile {
            parallel_capable,
            port_pressure,
            arithmetic_intensity,
        };
        assert_eq!(classify_cluster(&p(true, 0.1, 5.0), &th), Side::Pim);
        assert_eq!(classify_cluster(&p(false, 0.8, 5.0), &th), Side::Pim);
        assert_eq!(classify_cluster(&p(false, 0.5, 5.0), &th), Side::Pim);
        assert_eq!(classify_cluster(&p(false, 0.1, 0.5), &th), Side::Pim);
        assert_eq!(classify_cluster(&p(false, 0.1, 5.0), &th), Side::Cpu);
        assert_eq!(classify_cluster(&p(false, 0.1, 1.0), &th), Side::Cpu);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>(), Ok(s));
        }
        assert!("fastest".parse::<Strategy>().is_err());
    }

    #[test]
    fn tub_tie_break_prefers_lower_mask() {
        let a = TubCandidate { total_ns: 1.0, mask: 3 };
        let b = TubCandidate { total_ns: 1.0, mask: 1 };
        assert_eq!(a.better(b), b);
        assert_eq!(b.better(a), b);
        let c = TubCandidate { total_ns: 0.5, mask: 7 };
        assert_eq!(a.better(c), c);
    }

    #[test]
    fn config_rejects_negative_threshold() {
        let mut cfg = OffloadConfig::default();
        cfg.validate().unwrap();
        cfg.thresholds.pressure = -1.0;
        assert_eq!(cfg.validate(), Err(ScheduleError::Threshold("pressure")));
    }
}
