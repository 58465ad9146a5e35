//! Region-level views of a program at either granularity, for reporting.

use a3pim_core::analysis::{analyze, RegionMetrics};
use a3pim_core::cache::{simulate_cache, MissProfile};
use a3pim_core::cluster::{cluster, ClusterSet};
use a3pim_core::ir::{coarsen_to_functions, Program, Trace};
use a3pim_core::schedule::{Granularity, OffloadConfig, ScheduleError};

pub struct View {
    pub program: Program,
    pub metrics: Vec<RegionMetrics>,
    pub misses: Option<MissProfile>,
    pub clusters: ClusterSet,
}

/// Sums block-level miss counts into the function regions of `coarse`.
fn function_misses(blocks: &Program, block_misses: &MissProfile, coarse: &Program) -> MissProfile {
    let mut out = MissProfile::empty(coarse);
    for (i, r) in blocks.regions().iter().enumerate() {
        let slot =
            coarse.regions().iter().position(|f| f.function == r.function).expect("every block has a function region");
        out.misses[slot] += block_misses.misses[i];
        out.accesses[slot] += block_misses.accesses[i];
    }
    for (i, r) in coarse.regions().iter().enumerate() {
        let dynamic = r.frequency * r.instructions.len() as u64;
        if dynamic > 0 {
            out.mpki[i] = out.misses[i] as f64 * 1000.0 / dynamic as f64;
        }
    }
    out
}

/// Metrics and clusters at the requested granularity. Function-level views
/// cluster on static addresses only, since the trace names basic blocks.
pub fn build(
    program: &Program,
    trace: Option<&Trace>,
    cfg: &OffloadConfig,
    granularity: Granularity,
) -> Result<View, ScheduleError> {
    cfg.validate()?;
    let misses = match trace {
        Some(t) => Some(simulate_cache(program, t, &cfg.cache).map_err(ScheduleError::Cache)?),
        None => None,
    };
    match granularity {
        Granularity::BasicBlocks => {
            let metrics = analyze(program, &cfg.cpu, &cfg.pim, misses.as_ref());
            let clusters = cluster(program, &cfg.clustering, trace);
            Ok(View { program: program.clone(), metrics, misses, clusters })
        }
        Granularity::Functions => {
            let coarse = coarsen_to_functions(program);
            let misses = misses.map(|m| function_misses(program, &m, &coarse));
            let metrics = analyze(&coarse, &cfg.cpu, &cfg.pim, misses.as_ref());
            let clusters = cluster(&coarse, &cfg.clustering, None);
            Ok(View { program: coarse, metrics, misses, clusters })
        }
    }
}
