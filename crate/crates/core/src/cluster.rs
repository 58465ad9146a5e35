//! Affinity clustering: regions that reuse each other's memory addresses and
//! registers are merged so that they always land on the same side.
//!
//! Connectivity between two regions (or two clusters) is
//! `(alpha * memory_reuse + (1 - alpha) * register_reuse) / instruction_count`,
//! clamped to 1, where reuse counts pair up matching accesses
//! (`sum over shared locations of min(count_a, count_b)`) and the instruction
//! count is the larger of the two. Clusters are grown by repeatedly merging
//! the best-connected eligible pair until no pair reaches the threshold.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::ir::{Program, Region, RegionId, Trace};

/// Which cluster pairs are scored at each merge step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidatePolicy {
    /// Only clusters joined by a CFG edge.
    Adjacent,
    /// CFG neighbours plus any clusters sharing an address or register.
    #[default]
    AdjacentOrSharing,
    /// Every pair.
    AllPairs,
}

impl CandidatePolicy {
    pub fn name(self) -> &'static str {
        match self {
            CandidatePolicy::Adjacent => "adjacent",
            CandidatePolicy::AdjacentOrSharing => "adjacent-or-sharing",
            CandidatePolicy::AllPairs => "all-pairs",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [CandidatePolicy::Adjacent, CandidatePolicy::AdjacentOrSharing, CandidatePolicy::AllPairs]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringConfig {
    pub alpha: f64,
    pub theta: f64,
    pub policy: CandidatePolicy,
    /// Take memory footprints from the trace instead of the static IR.
    pub use_trace: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { alpha: 0.5, theta: 0.1, policy: CandidatePolicy::default(), use_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusteringConfigError {
    Alpha(f64),
    Theta(f64),
}

impl fmt::Display for ClusteringConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusteringConfigError::Alpha(a) => write!(f, "alpha must lie in [0, 1], got {a}"),
            ClusteringConfigError::Theta(t) => write!(f, "theta must lie in [0, 1], got {t}"),
        }
    }
}

impl core::error::Error for ClusteringConfigError {}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<(), ClusteringConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ClusteringConfigError::Alpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(ClusteringConfigError::Theta(self.theta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairReuse {
    pub region_a: RegionId,
    pub region_b: RegionId,
    pub memory_reuse: u64,
    pub register_reuse: u64,
    pub instruction_count: u64,
}

/// Access multisets of a region or cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Footprint {
    instructions: u64,
    registers: BTreeMap<u32, u64>,
    addresses: BTreeMap<u64, u64>,
}

#[derive(Default)]
struct Interner(BTreeMap<String, u32>);

impl Interner {
    fn get(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.0.get(name) {
            return id;
        }
        let id = self.0.len() as u32;
        self.0.insert(String::from(name), id);
        id
    }
}

impl Footprint {
    fn of_region(region: &Region, names: &mut Interner) -> Footprint {
        let mut fp = Footprint { instructions: region.instructions.len() as u64, ..Default::default() };
        for inst in &region.instructions {
            for reg in inst.registers() {
                *fp.registers.entry(names.get(reg)).or_default() += 1;
            }
            if let Some(addr) = inst.mem {
                *fp.addresses.entry(addr).or_default() += 1;
            }
        }
        fp
    }

    fn absorb(&mut self, other: &Footprint) {
        self.instructions += other.instructions;
        for (&k, &v) in &other.registers {
            *self.registers.entry(k).or_default() += v;
        }
        for (&k, &v) in &other.addresses {
            *self.addresses.entry(k).or_default() += v;
        }
    }
}

fn min_count_overlap<K: Ord>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> u64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(k, &x)| large.get(k).map(|&y| x.min(y))).sum()
}

fn reuse(a: &Footprint, b: &Footprint, ids: (RegionId, RegionId)) -> PairReuse {
    PairReuse {
        region_a: ids.0,
        region_b: ids.1,
        memory_reuse: min_count_overlap(&a.addresses, &b.addresses),
        register_reuse: min_count_overlap(&a.registers, &b.registers),
        instruction_count: a.instructions.max(b.instructions).max(1),
    }
}

/// Reuse statistics between two regions from their static instructions.
/// Register touches count both reads and writes.
pub fn pair_reuse(a: &Region, b: &Region) -> PairReuse {
    let mut names = Interner::default();
    let fa = Footprint::of_region(a, &mut names);
    let fb = Footprint::of_region(b, &mut names);
    reuse(&fa, &fb, (a.id, b.id))
}

/// Connectivity score in `[0, 1]`.
pub fn connectivity(pr: &PairReuse, cfg: &ClusteringConfig) -> f64 {
    if pr.memory_reuse == 0 && pr.register_reuse == 0 {
        return 0.0;
    }
    let weighted = cfg.alpha * pr.memory_reuse as f64 + (1.0 - cfg.alpha) * pr.register_reuse as f64;
    (weighted / pr.instruction_count.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    /// Smallest member region id; names the cluster.
    pub id: RegionId,
    /// Member region indices in region-id order.
    pub members: Vec<usize>,
    pub frequency: u64,
    pub parallel: bool,
    pub instruction_count: u64,
}

/// A partition of a program's regions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSet {
    clusters: Vec<Cluster>,
    owner: Vec<usize>,
}

impl ClusterSet {
    /// Every region in its own cluster.
    pub fn singletons(program: &Program) -> ClusterSet {
        let groups = id_order(program).into_iter().map(|i| vec![i]).collect();
        ClusterSet::from_groups(program, groups)
    }

    /// Builds a partition from explicit groups of region indices. Groups are
    /// reordered by smallest member id.
    ///
    /// # Panics
    /// If the groups do not cover every region exactly once.
    pub fn from_groups(program: &Program, groups: Vec<Vec<usize>>) -> ClusterSet {
        let mut owner = vec![usize::MAX; program.len()];
        let regions = program.regions();
        let mut clusters: Vec<Cluster> = groups
            .into_iter()
            .map(|mut members| {
                members.sort_by_key(|&m| regions[m].id);
                Cluster {
                    id: regions[members[0]].id,
                    frequency: members.iter().map(|&m| regions[m].frequency).sum(),
                    parallel: members.iter().any(|&m| regions[m].parallel),
                    instruction_count: members.iter().map(|&m| regions[m].instructions.len() as u64).sum(),
                    members,
                }
            })
            .collect();
        clusters.sort_by_key(|c| c.id);
        for (ci, c) in clusters.iter().enumerate() {
            for &m in &c.members {
                assert_eq!(owner[m], usize::MAX, "region index {m} assigned twice");
                owner[m] = ci;
            }
        }
        assert!(owner.iter().all(|&o| o != usize::MAX), "groups do not cover all regions");
        ClusterSet { clusters, owner }
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster index owning region index `region`.
    pub fn cluster_of(&self, region: usize) -> usize {
        self.owner[region]
    }
}

fn id_order(program: &Program) -> Vec<usize> {
    let mut order: Vec<usize> = (0..program.len()).collect();
    order.sort_by_key(|&i| program.regions()[i].id);
    order
}

fn footprints(program: &Program, trace: Option<&Trace>) -> Vec<Footprint> {
    let mut names = Interner::default();
    let mut fps: Vec<Footprint> = program.regions().iter().map(|r| Footprint::of_region(r, &mut names)).collect();
    if let Some(trace) = trace {
        let mut dynamic: Vec<BTreeMap<u64, u64>> = vec![BTreeMap::new(); program.len()];
        for (region, addrs) in trace.indexed() {
            for &a in addrs {
                *dynamic[region].entry(a).or_default() += 1;
            }
        }
        for ((fp, counts), region) in fps.iter_mut().zip(dynamic).zip(program.regions()) {
            let freq = region.frequency.max(1);
            // Average accesses per execution, rounded up.
            fp.addresses = counts.into_iter().map(|(a, n)| (a, n.div_ceil(freq))).collect();
        }
    }
    fps
}

/// Greedy agglomerative clustering on connectivity.
///
/// Each step merges the eligible pair with the highest score, provided the
/// score is positive and at least `theta`; scores involving the merged
/// cluster are recomputed from the combined footprint. Ties go to the pair
/// whose smaller minimum region id is lowest, then the larger.
#[allow(clippy::needless_range_loop)]
pub fn cluster(program: &Program, cfg: &ClusteringConfig, trace: Option<&Trace>) -> ClusterSet {
    let order = id_order(program);
    let n = order.len();
    let mut slot_of = vec![0; n];
    for (slot, &region) in order.iter().enumerate() {
        slot_of[region] = slot;
    }
    let mut fps = footprints(program, if cfg.use_trace { trace } else { None });
    let mut live: Vec<Option<(Footprint, Vec<usize>)>> =
        order.iter().map(|&r| Some((core::mem::take(&mut fps[r]), vec![r]))).collect();
    let ids: Vec<RegionId> = order.iter().map(|&r| program.regions()[r].id).collect();

    let mut adjacent = vec![vec![false; n]; n];
    for (from, to, _) in program.indexed_edges() {
        let (a, b) = (slot_of[from], slot_of[to]);
        if a != b {
            adjacent[a][b] = true;
            adjacent[b][a] = true;
        }
    }

    let score_of = |live: &[Option<(Footprint, Vec<usize>)>], adjacent: &[Vec<bool>], i: usize, j: usize| {
        let (Some((fa, _)), Some((fb, _))) = (&live[i], &live[j]) else {
            return None;
        };
        let pr = reuse(fa, fb, (ids[i], ids[j]));
        let eligible = match cfg.policy {
            CandidatePolicy::Adjacent => adjacent[i][j],
            CandidatePolicy::AdjacentOrSharing => adjacent[i][j] || pr.memory_reuse > 0 || pr.register_reuse > 0,
            CandidatePolicy::AllPairs => true,
        };
        eligible.then(|| connectivity(&pr, cfg))
    };

    // Upper triangle: score[i][j] for i < j.
    let mut score = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            score[i][j] = score_of(&live, &adjacent, i, j);
        }
    }

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in score.iter().enumerate() {
            for (j, s) in row.iter().enumerate().skip(i + 1) {
                let Some(s) = *s else { continue };
                if s <= 0.0 || s < cfg.theta {
                    continue;
                }
                // Slots are in min-id order, so scanning order is the tie-break.
                if best.is_none_or(|(b, _, _)| s > b) {
                    best = Some((s, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };

        let (fj, mj) = live[j].take().expect("live slot");
        let (fi, mi) = live[i].as_mut().expect("live slot");
        fi.absorb(&fj);
        mi.extend(mj);
        for k in 0..n {
            adjacent[i][k] |= adjacent[j][k];
            adjacent[k][i] |= adjacent[k][j];
        }
        adjacent[i][i] = false;
        for k in 0..n {
            let (a, b) = if k < j { (k, j) } else { (j, k) };
            score[a][b] = None;
        }
        for k in 0..n {
            if k == i {
                continue;
            }
            let (a, b) = if k < i { (k, i) } else { (i, k) };
            score[a][b] = score_of(&live, &adjacent, a, b);
        }
    }

    let groups = live.into_iter().flatten().map(|(_, members)| members).collect();
    ClusterSet::from_groups(program, groups)
}
