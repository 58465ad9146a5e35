use a3pim_core::analysis::Side;
use a3pim_core::cost::{total_cost, Schedule};
use a3pim_core::schedule::{Granularity, OffloadConfig, Offloader, Strategy, StrategyResult};
use a3pim_core::workload::random_program;
use proptest::prelude::*;

/// Minimum over all `2^n` region assignments, each priced from scratch.
fn brute_force_minimum(off: &Offloader<'_>) -> f64 {
    let n = off.program().len();
    let ctx = off.context();
    (0..1u64 << n)
        .map(|mask| {
            let sides = (0..n).map(|i| if mask >> i & 1 == 1 { Side::Pim } else { Side::Cpu }).collect();
            total_cost(&ctx, &Schedule::new(sides)).unwrap().total_ns
        })
        .fold(f64::INFINITY, f64::min)
}

fn all_results(off: &Offloader<'_>) -> Vec<StrategyResult> {
    Strategy::ALL.iter().map(|&s| off.run(s).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tub_is_the_global_minimum(seed in any::<u64>(), n in 1usize..=10) {
        let (program, trace) = random_program(seed, n);
        let cfg = OffloadConfig::default();
        let off = Offloader::new(&program, Some(&trace), &cfg).unwrap();
        let tub = off.tub().unwrap();
        prop_assert_eq!(tub.breakdown.total_ns, brute_force_minimum(&off));
        for r in all_results(&off) {
            prop_assert!(tub.breakdown.total_ns <= r.breakdown.total_ns, "{} beats tub", r.strategy);
            prop_assert_eq!(r.schedule.sides().len(), program.len());
            prop_assert_eq!(r.unit_sides.len(), r.units.len());
            let covered: usize = r.units.iter().map(Vec::len).sum();
            prop_assert_eq!(covered, program.len());
        }
    }

    #[test]
    fn classification_ignores_frequency_scale(seed in any::<u64>(), n in 1usize..=12, k in 2u64..1000) {
        let (program, _) = random_program(seed, n);
        let scaled = program.scale_profile(k);
        let cfg = OffloadConfig::default();
        let a = Offloader::new(&program, None, &cfg).unwrap();
        let b = Offloader::new(&scaled, None, &cfg).unwrap();
        for g in [Granularity::BasicBlocks, Granularity::Functions] {
            prop_assert_eq!(a.a3pim(g).unwrap().schedule, b.a3pim(g).unwrap().schedule);
        }
    }

    #[test]
    fn greedy_ignores_switching_constants(
        seed in any::<u64>(),
        n in 1usize..=12,
        cycles in 1u64..100_000,
        cpu_ns in 0.5f64..1000.0,
        pim_ns in 0.5f64..1000.0,
        lines in 1u64..16,
    ) {
        let (program, trace) = random_program(seed, n);
        let base = OffloadConfig::default();
        let mut changed = base.clone();
        changed.cost.context_switch_cycles = cycles;
        changed.cost.cl_flush_fetch_cpu_ns = cpu_ns;
        changed.cost.cl_flush_fetch_pim_ns = pim_ns;
        changed.cost.register_dm_lines = lines;
        let a = Offloader::new(&program, Some(&trace), &base).unwrap().greedy().unwrap();
        let b = Offloader::new(&program, Some(&trace), &changed).unwrap().greedy().unwrap();
        prop_assert_eq!(a.schedule, b.schedule);
    }

    #[test]
    fn forced_classifier_reproduces_uniform_baselines(seed in any::<u64>(), n in 1usize..=12) {
        let (program, trace) = random_program(seed, n);
        let mut to_pim = OffloadConfig::default();
        to_pim.clustering.theta = 1.0;
        to_pim.thresholds.ai = f64::MAX;
        let mut to_cpu = to_pim.clone();
        to_cpu.thresholds.ai = 0.0;
        to_cpu.thresholds.pressure = 2.0;
        to_cpu.pim.cores = u32::MAX;
        for (cfg, baseline) in [(&to_pim, Strategy::PimOnly), (&to_cpu, Strategy::CpuOnly)] {
            let off = Offloader::new(&program, Some(&trace), cfg).unwrap();
            let uniform = off.run(baseline).unwrap();
            let a3pim = off.a3pim(Granularity::BasicBlocks).unwrap();
            prop_assert_eq!(&a3pim.schedule, &uniform.schedule);
            prop_assert_eq!(a3pim.breakdown, uniform.breakdown);
        }
    }

    #[test]
    fn scheduling_is_deterministic(seed in any::<u64>(), n in 1usize..=12) {
        let (program, trace) = random_program(seed, n);
        let cfg = OffloadConfig::default();
        let off = Offloader::new(&program, Some(&trace), &cfg).unwrap();
        prop_assert_eq!(all_results(&off), all_results(&off));
    }
}
