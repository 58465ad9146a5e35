//! Flat `key = value` configuration files covering every tunable constant.

use std::fmt::Write as _;
use std::str::FromStr;

use a3pim_core::analysis::MachineModel;
use a3pim_core::cluster::CandidatePolicy;
use a3pim_core::ir::OpClass;
use a3pim_core::schedule::{OffloadConfig, ScheduleError, TubUnits};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`: {reason}")]
    BadValue { line: usize, key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(ScheduleError),
}

enum SetError {
    Unknown,
    Bad(String),
}

fn num<T: FromStr>(value: &str) -> Result<T, SetError> {
    value.parse::<T>().map_err(|_| SetError::Bad(format!("expected {}", std::any::type_name::<T>())))
}

fn flag(value: &str) -> Result<bool, SetError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(SetError::Bad(String::from("expected true or false"))),
    }
}

fn set_model(model: &mut MachineModel, key: &str, value: &str) -> Result<(), SetError> {
    if let Some(op) = key.strip_prefix("lat.") {
        let op = OpClass::from_mnemonic(op).ok_or(SetError::Unknown)?;
        model.latency.set(op, num(value)?);
        return Ok(());
    }
    match key {
        "issue_width" => model.issue_width = num(value)?,
        "ls_ports" => model.ls_ports = num(value)?,
        "miss_penalty" => model.miss_penalty = num(value)?,
        "clock_ghz" => model.clock_ghz = num(value)?,
        "cores" => model.cores = num(value)?,
        _ => return Err(SetError::Unknown),
    }
    Ok(())
}

fn set_key(cfg: &mut OffloadConfig, key: &str, value: &str) -> Result<(), SetError> {
    if let Some(rest) = key.strip_prefix("cpu.") {
        return set_model(&mut cfg.cpu, rest, value);
    }
    if let Some(rest) = key.strip_prefix("pim.") {
        return set_model(&mut cfg.pim, rest, value);
    }
    match key {
        "cost.cl_flush_fetch_cpu_ns" => cfg.cost.cl_flush_fetch_cpu_ns = num(value)?,
        "cost.cl_flush_fetch_pim_ns" => cfg.cost.cl_flush_fetch_pim_ns = num(value)?,
        "cost.register_dm_lines" => cfg.cost.register_dm_lines = num(value)?,
        "cost.context_switch_cycles" => cfg.cost.context_switch_cycles = num(value)?,
        "cost.clock_ghz" => cfg.cost.clock_ghz = num(value)?,
        "cost.cache_line_bytes" => cfg.cost.cache_line_bytes = num(value)?,
        "cache.size_bytes" => cfg.cache.size_bytes = num(value)?,
        "cache.associativity" => cfg.cache.associativity = num(value)?,
        "cache.line_bytes" => cfg.cache.line_bytes = num(value)?,
        "cluster.alpha" => cfg.clustering.alpha = num(value)?,
        "cluster.theta" => cfg.clustering.theta = num(value)?,
        "cluster.policy" => {
            cfg.clustering.policy = CandidatePolicy::from_name(value)
                .ok_or_else(|| SetError::Bad(String::from("expected adjacent, adjacent-or-sharing or all-pairs")))?
        }
        "cluster.use_trace" => cfg.clustering.use_trace = flag(value)?,
        "sched.pressure_threshold" => cfg.thresholds.pressure = num(value)?,
        "sched.ai_threshold" => cfg.thresholds.ai = num(value)?,
        "sched.mpki_threshold" => cfg.thresholds.mpki = num(value)?,
        "sched.tub_limit" => cfg.tub_limit = num(value)?,
        "sched.tub_units" => {
            cfg.tub_units = match value {
                "regions" => TubUnits::Regions,
                "clusters" => TubUnits::Clusters,
                _ => return Err(SetError::Bad(String::from("expected regions or clusters"))),
            }
        }
        _ => return Err(SetError::Unknown),
    }
    Ok(())
}

/// Applies `text` on top of the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<OffloadConfig, ConfigError> {
    let mut cfg = OffloadConfig::default();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        set_key(&mut cfg, key, value).map_err(|e| match e {
            SetError::Unknown => ConfigError::UnknownKey { line, key: key.to_string() },
            SetError::Bad(reason) => {
                ConfigError::BadValue { line, key: key.to_string(), value: value.to_string(), reason }
            }
        })?;
    }
    cfg.validate().map_err(ConfigError::Invalid)?;
    Ok(cfg)
}

fn dump_model(out: &mut String, prefix: &str, m: &MachineModel) {
    let _ = writeln!(out, "{prefix}.issue_width = {}", m.issue_width);
    let _ = writeln!(out, "{prefix}.ls_ports = {}", m.ls_ports);
    let _ = writeln!(out, "{prefix}.miss_penalty = {}", m.miss_penalty);
    let _ = writeln!(out, "{prefix}.clock_ghz = {}", m.clock_ghz);
    let _ = writeln!(out, "{prefix}.cores = {}", m.cores);
    for op in OpClass::ALL {
        let _ = writeln!(out, "{prefix}.lat.{} = {}", op.mnemonic(), m.latency.get(op));
    }
}

/// Every key with its current value, in a fixed order; the output parses back
/// to the same configuration.
pub fn dump_config(cfg: &OffloadConfig) -> String {
    let mut out = String::new();
    dump_model(&mut out, "cpu", &cfg.cpu);
    dump_model(&mut out, "pim", &cfg.pim);
    let c = &cfg.cost;
    let _ = writeln!(out, "cost.cl_flush_fetch_cpu_ns = {}", c.cl_flush_fetch_cpu_ns);
    let _ = writeln!(out, "cost.cl_flush_fetch_pim_ns = {}", c.cl_flush_fetch_pim_ns);
    let _ = writeln!(out, "cost.register_dm_lines = {}", c.register_dm_lines);
    let _ = writeln!(out, "cost.context_switch_cycles = {}", c.context_switch_cycles);
    let _ = writeln!(out, "cost.clock_ghz = {}", c.clock_ghz);
    let _ = writeln!(out, "cost.cache_line_bytes = {}", c.cache_line_bytes);
    let _ = writeln!(out, "cache.size_bytes = {}", cfg.cache.size_bytes);
    let _ = writeln!(out, "cache.associativity = {}", cfg.cache.associativity);
    let _ = writeln!(out, "cache.line_bytes = {}", cfg.cache.line_bytes);
    let k = &cfg.clustering;
    let _ = writeln!(out, "cluster.alpha = {}", k.alpha);
    let _ = writeln!(out, "cluster.theta = {}", k.theta);
    let _ = writeln!(out, "cluster.policy = {}", k.policy.name());
    let _ = writeln!(out, "cluster.use_trace = {}", k.use_trace);
    let t = &cfg.thresholds;
    let _ = writeln!(out, "sched.pressure_threshold = {}", t.pressure);
    let _ = writeln!(out, "sched.ai_threshold = {}", t.ai);
    let _ = writeln!(out, "sched.mpki_threshold = {}", t.mpki);
    let _ = writeln!(out, "sched.tub_limit = {}", cfg.tub_limit);
    let units = match cfg.tub_units {
        TubUnits::Regions => "regions",
        TubUnits::Clusters => "clusters",
    };
    let _ = writeln!(out, "sched.tub_units = {units}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips_defaults() {
        let cfg = OffloadConfig::default();
        assert_eq!(parse_config(&dump_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn overrides_apply() {
        let cfg = parse_config("# tweak\ncpu.lat.load = 7\ncluster.theta=0.25\nsched.tub_units = clusters\n").unwrap();
        assert_eq!(cfg.cpu.latency.get(OpClass::Load), 7);
        assert_eq!(cfg.clustering.theta, 0.25);
        assert_eq!(cfg.tub_units, TubUnits::Clusters);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse_config("\nnope = 1"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("cpu.issue_width = wide"), Err(ConfigError::BadValue { line: 1, .. })));
        assert!(matches!(parse_config("cluster.alpha"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(parse_config("cluster.alpha = 2"), Err(ConfigError::Invalid(_))));
    }
}
