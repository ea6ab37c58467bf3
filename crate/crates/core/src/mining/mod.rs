//! Counting and mining of n-flows.
//!
//! Two engines produce the same ranked output for contiguous flows: an exact
//! window counter ([`count_nflows`] + [`top_k`]) and a top-K sequential pattern
//! miner ([`mine_tks`]) that also supports gapped matches.

mod encode;
mod subsume;
mod table;
mod table_io;
mod tks;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::Flow;

pub use subsume::filter_subsumed;
pub use table::{
    compute_stats, count_nflows, count_nflows_parallel, merge_tables, top_k, FlowTable,
};
pub use table_io::{
    read_flow_table, write_flow_table, TableFormat, TableIoError, FLOW_TABLE_HEADER,
};
pub use tks::mine_tks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("flow length must be at least 1, got {0}")]
    InvalidLength(usize),
    #[error("cannot merge tables of different flow length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid mining config: {0}")]
    InvalidConfig(String),
    #[error("subsumption threshold must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("coverage is undefined for a table with no users")]
    NoUsers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub k: usize,
    /// Maximum number of skipped events between consecutive tools; 0 is contiguous.
    pub max_gap: usize,
    pub theta: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            n_min: 2,
            n_max: 4,
            k: 100,
            max_gap: 0,
            theta: 0.75,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), MiningError> {
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(MiningError::InvalidConfig(format!(
                "need 1 <= n_min <= n_max, got {}..{}",
                self.n_min, self.n_max
            )));
        }
        if self.k < 1 {
            return Err(MiningError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(MiningError::InvalidTheta(self.theta));
        }
        Ok(())
    }
}

/// Occurrence and user statistics for one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub flow: Flow,
    pub occurrences: u64,
    pub distinct_users: u64,
    /// `distinct_users / total_users`.
    pub user_coverage: f64,
}

/// Ranking order: occurrences desc, distinct users desc, canonical text asc.
pub fn rank_order(a: &FlowStats, b: &FlowStats) -> Ordering {
    b.occurrences
        .cmp(&a.occurrences)
        .then(b.distinct_users.cmp(&a.distinct_users))
        .then_with(|| a.flow.cmp(&b.flow))
}

/// Ranked flows of a single length `n`, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFlows {
    pub n: usize,
    pub entries: Vec<FlowStats>,
}

impl RankedFlows {
    pub fn new(n: usize, mut entries: Vec<FlowStats>) -> Self {
        entries.sort_by(rank_order);
        RankedFlows { n, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> + '_ {
        self.entries.iter().map(|e| &e.flow)
    }
}
