//! Trace-driven set-associative LRU cache, used as a single last-level
//! cache to derive per-region miss counts and MPKI.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ir::{Program, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub size_bytes: u64,
    pub associativity: u32,
    pub line_bytes: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig { size_bytes: 2 * 1024 * 1024, associativity: 16, line_bytes: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheConfigError {
    pub size_bytes: u64,
    pub set_bytes: u64,
}

impl fmt::Display for CacheConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cache size {} is not a positive multiple of associativity x line size ({})",
            self.size_bytes, self.set_bytes
        )
    }
}

impl core::error::Error for CacheConfigError {}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheConfigError> {
        let set_bytes = u64::from(self.associativity) * self.line_bytes;
        if set_bytes == 0 || self.size_bytes == 0 || !self.size_bytes.is_multiple_of(set_bytes) {
            return Err(CacheConfigError { size_bytes: self.size_bytes, set_bytes });
        }
        Ok(())
    }

    pub fn sets(&self) -> u64 {
        self.size_bytes / (u64::from(self.associativity) * self.line_bytes)
    }
}

/// Set-associative cache over line ids with true LRU replacement.
#[derive(Debug, Clone)]
pub struct LruCache {
    // Each set holds resident line ids, least recently used first.
    sets: Vec<Vec<u64>>,
    ways: usize,
}

impl LruCache {
    pub fn new(config: &CacheConfig) -> Result<Self, CacheConfigError> {
        config.validate()?;
        let ways = config.associativity as usize;
        Ok(LruCache { sets: vec![Vec::with_capacity(ways); config.sets() as usize], ways })
    }

    /// Touches `line`; returns `true` on a hit.
    pub fn access(&mut self, line: u64) -> bool {
        let n = self.sets.len() as u64;
        let set = &mut self.sets[(line % n) as usize];
        if let Some(pos) = set.iter().position(|&l| l == line) {
            set.remove(pos);
            set.push(line);
            true
        } else {
            if set.len() == self.ways {
                set.remove(0);
            }
            set.push(line);
            false
        }
    }
}

/// Per-region miss statistics, indexed like [`Program::regions`].
#[derive(Debug, Clone, PartialEq)]
pub struct MissProfile {
    pub misses: Vec<u64>,
    pub accesses: Vec<u64>,
    pub mpki: Vec<f64>,
}

impl MissProfile {
    pub fn empty(program: &Program) -> Self {
        let n = program.len();
        MissProfile { misses: vec![0; n], accesses: vec![0; n], mpki: vec![0.0; n] }
    }
}

/// Replays every trace address through one cold cache, attributing each miss
/// to the region whose execution issued it. MPKI is misses per thousand
/// dynamic instructions of that region (frequency x static size).
pub fn simulate_cache(program: &Program, trace: &Trace, config: &CacheConfig) -> Result<MissProfile, CacheConfigError> {
    let mut cache = LruCache::new(config)?;
    let mut profile = MissProfile::empty(program);
    for (region, addrs) in trace.indexed() {
        for &addr in addrs {
            profile.accesses[region] += 1;
            if !cache.access(addr / config.line_bytes) {
                profile.misses[region] += 1;
            }
        }
    }
    for (i, r) in program.regions().iter().enumerate() {
        let dynamic = r.frequency * r.instructions.len() as u64;
        if dynamic > 0 {
            profile.mpki[i] = profile.misses[i] as f64 * 1000.0 / dynamic as f64;
        }
    }
    Ok(profile)
}
