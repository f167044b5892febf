use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plans::PlanId;
use crate::query::QueryShape;

pub const DEFAULT_REPLAN_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CacheMode {
    Off,
    On,
    /// Cached plans are reused unconditionally.
    OnNoReplan,
}

impl CacheMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheMode::Off => "off",
            CacheMode::On => "on",
            CacheMode::OnNoReplan => "on-no-replan",
        }
    }
}

impl fmt::Display for CacheMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CacheMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [CacheMode::Off, CacheMode::On, CacheMode::OnNoReplan]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown cache mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCacheEntry {
    pub shape: QueryShape,
    pub plan_id: PlanId,
    /// Works the plan needed during the race that selected it.
    pub trial_works: u64,
    pub replan_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanDecision {
    Keep,
    Evict,
}

/// Evicts once a cached plan needs more than `replan_factor` times the works
/// it needed when it was selected.
pub fn maybe_replan(entry: &PlanCacheEntry, observed_works: u64, mode: CacheMode) -> ReplanDecision {
    if mode != CacheMode::On {
        return ReplanDecision::Keep;
    }
    if observed_works as f64 > entry.replan_factor * entry.trial_works as f64 {
        ReplanDecision::Evict
    } else {
        ReplanDecision::Keep
    }
}

/// One winning plan per query shape. Not internally synchronized.
#[derive(Debug, Clone)]
pub struct PlanCache {
    entries: HashMap<QueryShape, PlanCacheEntry>,
    replan_factor: f64,
}

impl Default for PlanCache {
    fn default() -> Self {
        PlanCache::new(DEFAULT_REPLAN_FACTOR)
    }
}

impl PlanCache {
    pub fn new(replan_factor: f64) -> Self {
        PlanCache {
            entries: HashMap::new(),
            replan_factor,
        }
    }

    pub fn get(&self, shape: &QueryShape) -> Option<&PlanCacheEntry> {
        self.entries.get(shape)
    }

    pub fn insert(&mut self, shape: QueryShape, plan_id: PlanId, trial_works: u64) {
        let entry = PlanCacheEntry {
            shape: shape.clone(),
            plan_id,
            trial_works,
            replan_factor: self.replan_factor,
        };
        self.entries.insert(shape, entry);
    }

    pub fn evict(&mut self, shape: &QueryShape) -> Option<PlanCacheEntry> {
        self.entries.remove(shape)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
