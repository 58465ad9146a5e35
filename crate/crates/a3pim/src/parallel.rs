//! Multi-threaded drivers over the single-threaded core.

use a3pim_core::schedule::{Offloader, ScheduleError, Strategy, StrategyResult};
use rayon::prelude::*;

/// Assignments evaluated per work item.
const CHUNK: u64 = 4096;

/// Exhaustive search split across threads. Candidates are reduced with a
/// total order on (cost, mask), so the result matches [`Offloader::tub`]
/// regardless of scheduling.
pub fn tub(off: &Offloader<'_>) -> Result<StrategyResult, ScheduleError> {
    let units = off.tub_units();
    off.check_tub_limit(&units)?;
    let total = 1u64 << units.len();
    let chunks = total.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .filter_map(|c| off.tub_search(&units, c * CHUNK..((c + 1) * CHUNK).min(total)))
        .reduce_with(|a, b| a.better(b))
        .expect("at least one assignment");
    off.tub_result(&units, best.mask)
}

pub fn run(off: &Offloader<'_>, strategy: Strategy) -> Result<StrategyResult, ScheduleError> {
    match strategy {
        Strategy::Tub => tub(off),
        s => off.run(s),
    }
}

/// Every strategy, run concurrently, returned in [`Strategy::ALL`] order.
pub fn run_all(off: &Offloader<'_>) -> Vec<(Strategy, Result<StrategyResult, ScheduleError>)> {
    Strategy::ALL.par_iter().map(|&s| (s, run(off, s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use a3pim_core::schedule::OffloadConfig;
    use a3pim_core::workload::random_program;

    #[test]
    fn parallel_tub_matches_sequential() {
        let cfg = OffloadConfig::default();
        for seed in 0..20 {
            let (p, t) = random_program(seed, 12);
            let off = Offloader::new(&p, Some(&t), &cfg).unwrap();
            assert_eq!(tub(&off).unwrap(), off.tub().unwrap());
        }
    }
}
