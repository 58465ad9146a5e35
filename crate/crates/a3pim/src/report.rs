//! Tabular outputs: region metrics, clusters, schedules and strategy
//! comparisons, each as CSV or JSON.

use a3pim_core::analysis::{RegionMetrics, Side};
use a3pim_core::cache::MissProfile;
use a3pim_core::cluster::ClusterSet;
use a3pim_core::cost::CostBreakdown;
use a3pim_core::ir::{Program, RegionId};
use a3pim_core::schedule::{classify_cluster, ClusterProfile, OffloadConfig, Strategy, StrategyResult};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Renders flat rows as a CSV table or a JSON array.
pub fn render_rows<T: Serialize>(rows: &[T], format: Format) -> Result<String, ReportError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub region: RegionId,
    pub function: String,
    pub uops: u64,
    pub mem_ops: u64,
    pub compute_ops: u64,
    pub arithmetic_intensity: f64,
    pub port_pressure_cpu: f64,
    pub port_pressure_pim: f64,
    pub cycles_cpu: u64,
    pub cycles_pim: u64,
    pub critical_path_cpu: u64,
    pub critical_path_pim: u64,
    pub parallel_capable: bool,
    pub frequency: u64,
    pub misses: u64,
    pub mpki: f64,
}

pub fn metrics_rows(program: &Program, metrics: &[RegionMetrics], misses: Option<&MissProfile>) -> Vec<MetricsRow> {
    program
        .regions()
        .iter()
        .zip(metrics)
        .enumerate()
        .map(|(i, (r, m))| MetricsRow {
            region: r.id,
            function: r.function.clone(),
            uops: m.uops,
            mem_ops: m.mem_ops,
            compute_ops: m.compute_ops,
            arithmetic_intensity: m.arithmetic_intensity,
            port_pressure_cpu: m.port_pressure.cpu,
            port_pressure_pim: m.port_pressure.pim,
            cycles_cpu: m.cycles.cpu,
            cycles_pim: m.cycles.pim,
            critical_path_cpu: m.critical_path.cpu,
            critical_path_pim: m.critical_path.pim,
            parallel_capable: m.parallel_capable,
            frequency: r.frequency,
            misses: m.misses,
            mpki: misses.map_or(0.0, |p| p.mpki[i]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRow {
    pub cluster: RegionId,
    /// Member region ids separated by spaces.
    pub members: String,
    pub frequency: u64,
    pub instruction_count: u64,
    pub parallel_capable: bool,
    pub port_pressure: f64,
    pub arithmetic_intensity: f64,
    pub side: Side,
}

/// One row per cluster with its aggregate profile and classifier decision.
pub fn cluster_rows(
    program: &Program,
    metrics: &[RegionMetrics],
    clusters: &ClusterSet,
    cfg: &OffloadConfig,
) -> Vec<ClusterRow> {
    clusters
        .clusters()
        .iter()
        .map(|c| {
            let profile = ClusterProfile::aggregate(program, metrics, &c.members, &cfg.cpu);
            let members: Vec<String> = c.members.iter().map(|&m| program.regions()[m].id.to_string()).collect();
            ClusterRow {
                cluster: c.id,
                members: members.join(" "),
                frequency: c.frequency,
                instruction_count: c.instruction_count,
                parallel_capable: profile.parallel_capable,
                port_pressure: profile.port_pressure,
                arithmetic_intensity: profile.arithmetic_intensity,
                side: classify_cluster(&profile, &cfg.thresholds),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitReport {
    pub members: Vec<RegionId>,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignmentRow {
    pub region: RegionId,
    pub unit: usize,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub strategy: Strategy,
    pub units: Vec<UnitReport>,
    pub assignment: Vec<AssignmentRow>,
    pub breakdown: CostBreakdown,
}

impl ScheduleReport {
    pub fn new(result: &StrategyResult) -> Self {
        let units = result
            .units
            .iter()
            .zip(&result.unit_sides)
            .map(|(members, &side)| UnitReport { members: members.clone(), side })
            .collect::<Vec<_>>();
        let mut assignment: Vec<AssignmentRow> = units
            .iter()
            .enumerate()
            .flat_map(|(u, unit)| {
                unit.members.iter().map(move |&region| AssignmentRow { region, unit: u, side: unit.side })
            })
            .collect();
        assignment.sort_by_key(|a| a.region);
        ScheduleReport { strategy: result.strategy, units, assignment, breakdown: result.breakdown }
    }

    /// JSON carries the full report; CSV carries the per-region assignment.
    pub fn render(&self, format: Format) -> Result<String, ReportError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => render_rows(&self.assignment, Format::Csv),
        }
    }
}

/// Percentage of total time spent in each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shares {
    pub exec_pct: f64,
    pub cl_dm_pct: f64,
    pub cxt_pct: f64,
}

impl Shares {
    /// A zero-cost schedule is attributed entirely to execution.
    pub fn of(b: &CostBreakdown) -> Shares {
        if b.total_ns <= 0.0 {
            return Shares { exec_pct: 100.0, cl_dm_pct: 0.0, cxt_pct: 0.0 };
        }
        Shares {
            exec_pct: 100.0 * b.exec_ns / b.total_ns,
            cl_dm_pct: 100.0 * b.cl_dm_ns / b.total_ns,
            cxt_pct: 100.0 * b.cxt_ns / b.total_ns,
        }
    }
}

/// One strategy's line in a comparison. Numeric fields are empty when the
/// strategy could not run, in which case `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: Strategy,
    pub exec_ns: Option<f64>,
    pub cl_dm_ns: Option<f64>,
    pub cxt_ns: Option<f64>,
    pub total_ns: Option<f64>,
    pub exec_pct: Option<f64>,
    pub cl_dm_pct: Option<f64>,
    pub cxt_pct: Option<f64>,
    pub speedup_vs_cpu_only: Option<f64>,
    pub speedup_vs_pim_only: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub strategies: Vec<ComparisonRow>,
}

fn speedup(baseline: Option<f64>, total: f64) -> Option<f64> {
    match baseline {
        Some(b) if total > 0.0 => Some(b / total),
        _ => None,
    }
}

impl ComparisonReport {
    pub fn new<E: std::fmt::Display>(outcomes: &[(Strategy, Result<StrategyResult, E>)]) -> Self {
        let total_of = |s: Strategy| {
            outcomes.iter().find(|(st, _)| *st == s).and_then(|(_, r)| r.as_ref().ok()).map(|r| r.breakdown.total_ns)
        };
        let (cpu, pim) = (total_of(Strategy::CpuOnly), total_of(Strategy::PimOnly));
        let strategies = outcomes
            .iter()
            .map(|(strategy, outcome)| match outcome {
                Ok(r) => {
                    let b = r.breakdown;
                    let sh = Shares::of(&b);
                    ComparisonRow {
                        strategy: *strategy,
                        exec_ns: Some(b.exec_ns),
                        cl_dm_ns: Some(b.cl_dm_ns),
                        cxt_ns: Some(b.cxt_ns),
                        total_ns: Some(b.total_ns),
                        exec_pct: Some(sh.exec_pct),
                        cl_dm_pct: Some(sh.cl_dm_pct),
                        cxt_pct: Some(sh.cxt_pct),
                        speedup_vs_cpu_only: speedup(cpu, b.total_ns),
                        speedup_vs_pim_only: speedup(pim, b.total_ns),
                        error: None,
                    }
                }
                Err(e) => ComparisonRow {
                    strategy: *strategy,
                    exec_ns: None,
                    cl_dm_ns: None,
                    cxt_ns: None,
                    total_ns: None,
                    exec_pct: None,
                    cl_dm_pct: None,
                    cxt_pct: None,
                    speedup_vs_cpu_only: None,
                    speedup_vs_pim_only: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        ComparisonReport { strategies }
    }

    pub fn row(&self, strategy: Strategy) -> Option<&ComparisonRow> {
        self.strategies.iter().find(|r| r.strategy == strategy)
    }

    pub fn render(&self, format: Format) -> Result<String, ReportError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => render_rows(&self.strategies, Format::Csv),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_sum_to_hundred() {
        let s = Shares::of(&CostBreakdown::new(1.0, 2.0, 7.0));
        assert!((s.exec_pct + s.cl_dm_pct + s.cxt_pct - 100.0).abs() < 1e-9);
        assert_eq!(s.cxt_pct, 70.0);
        let z = Shares::of(&CostBreakdown::new(0.0, 0.0, 0.0));
        assert_eq!(z.exec_pct, 100.0);
    }

    #[test]
    fn absent_strategy_renders_empty_fields() {
        let outcomes: Vec<(Strategy, Result<StrategyResult, String>)> =
            vec![(Strategy::Mpki, Err(String::from("needs a trace")))];
        let csv = ComparisonReport::new(&outcomes).render(Format::Csv).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("strategy,exec_ns"));
        assert_eq!(lines.next().unwrap(), "mpki,,,,,,,,,,needs a trace");
    }
}
