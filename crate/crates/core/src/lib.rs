//! Static CPU/PIM offloading analysis.
//!
//! The pipeline takes a [`ir::Program`] (basic blocks with a control-flow
//! profile) and optionally a [`ir::Trace`] of memory accesses, then
//!
//! 1. estimates per-region cycles, port pressure and arithmetic intensity
//!    for both targets ([`analysis`]),
//! 2. merges regions that share data into clusters ([`cluster`]),
//! 3. maps each cluster to CPU or PIM from its intrinsic metrics
//!    ([`schedule`]),
//!
//! and prices any schedule with an explicit model of execution time,
//! cache-line data movement and context switching ([`cost`]). Baseline
//! strategies, including an exhaustive optimum, live next to the offloader
//! for comparison.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod cache;
pub mod cluster;
pub mod cost;
pub mod ir;
pub mod schedule;
pub mod workload;

pub use analysis::{MachineModel, RegionMetrics, Side};
pub use cost::{CostBreakdown, CostConfig, Schedule};
pub use ir::{Program, RegionId, Trace};
pub use schedule::{OffloadConfig, Offloader, Strategy, StrategyResult};
