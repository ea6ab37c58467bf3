use std::collections::HashMap;
use std::sync::Arc;

use super::encode::Encoded;
use super::{rank_order, FlowStats, MiningError, RankedFlows};
use crate::flow::Flow;
use crate::ingest::Session;

#[derive(Debug, Clone, PartialEq, Eq)]
struct FlowCount {
    occurrences: u64,
    /// Sorted, deduplicated indexes into the table's user universe.
    users: Vec<u32>,
}

/// Count table of n-flows for one flow length.
///
/// The user universe is every user that had at least one session in the
/// counted input, whether or not they produced a window of length `n`.
#[derive(Debug, Clone)]
pub struct FlowTable {
    n: usize,
    users: Arc<[Arc<str>]>,
    entries: HashMap<Flow, FlowCount>,
}

impl FlowTable {
    /// An empty table over the given user universe.
    pub fn empty<I, S>(n: usize, users: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut users: Vec<Arc<str>> = users.into_iter().map(|u| Arc::from(u.as_ref())).collect();
        users.sort();
        users.dedup();
        FlowTable {
            n,
            users: users.into(),
            entries: HashMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_users(&self) -> u64 {
        self.users.len() as u64
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn occurrences(&self, flow: &Flow) -> u64 {
        self.entries.get(flow).map_or(0, |c| c.occurrences)
    }

    pub fn distinct_users(&self, flow: &Flow) -> u64 {
        self.entries.get(flow).map_or(0, |c| c.users.len() as u64)
    }

    /// Ids of the users contributing to `flow`, in ascending order.
    pub fn contributors(&self, flow: &Flow) -> Vec<&str> {
        self.entries
            .get(flow)
            .map(|c| c.users.iter().map(|&u| &*self.users[u as usize]).collect())
            .unwrap_or_default()
    }

    /// Sum of occurrences over all flows.
    pub fn total_occurrences(&self) -> u64 {
        self.entries.values().map(|c| c.occurrences).sum()
    }

    /// `(flow, occurrences, distinct_users)` in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = (&Flow, u64, u64)> + '_ {
        self.entries
            .iter()
            .map(|(f, c)| (f, c.occurrences, c.users.len() as u64))
    }

    fn stats_unchecked(&self) -> Vec<FlowStats> {
        let total = self.users.len() as f64;
        self.entries
            .iter()
            .map(|(flow, c)| FlowStats {
                flow: flow.clone(),
                occurrences: c.occurrences,
                distinct_users: c.users.len() as u64,
                user_coverage: c.users.len() as f64 / total,
            })
            .collect()
    }

    /// Rewrites user indexes onto a different (superset) universe.
    fn remapped(self, universe: &Arc<[Arc<str>]>) -> Self {
        if Arc::ptr_eq(&self.users, universe) || *self.users == **universe {
            return FlowTable {
                users: universe.clone(),
                ..self
            };
        }
        let map: Vec<u32> = self
            .users
            .iter()
            .map(|u| universe.binary_search(u).expect("universe is a superset") as u32)
            .collect();
        let entries = self
            .entries
            .into_iter()
            .map(|(flow, mut c)| {
                // Sorted universes make the index map monotone, so order survives.
                c.users.iter_mut().for_each(|u| *u = map[*u as usize]);
                (flow, c)
            })
            .collect();
        FlowTable {
            n: self.n,
            users: universe.clone(),
            entries,
        }
    }
}

impl PartialEq for FlowTable {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && *self.users == *other.users && self.entries == other.entries
    }
}

/// Counts every contiguous window of length `n` in every session.
///
/// Windows never cross session boundaries; each window adds one occurrence
/// and marks its session's user as a contributor.
pub fn count_nflows(sessions: &[Session], n: usize) -> Result<FlowTable, MiningError> {
    if n < 1 {
        return Err(MiningError::InvalidLength(n));
    }
    let enc = Encoded::new(sessions);
    let mut counts: HashMap<Vec<u32>, FlowCount> = HashMap::new();
    for (seq, &user) in enc.sessions.iter().zip(&enc.session_user) {
        for window in seq.windows(n) {
            match counts.get_mut(window) {
                Some(c) => {
                    c.occurrences += 1;
                    if c.users.last() != Some(&user) {
                        c.users.push(user);
                    }
                }
                None => {
                    counts.insert(
                        window.to_vec(),
                        FlowCount {
                            occurrences: 1,
                            users: vec![user],
                        },
                    );
                }
            }
        }
    }
    let entries = counts
        .into_iter()
        .map(|(ids, mut c)| {
            c.users.sort_unstable();
            c.users.dedup();
            (Flow::from_shared(enc.tool_names(&ids)), c)
        })
        .collect();
    Ok(FlowTable {
        n,
        users: enc.users,
        entries,
    })
}

/// Shards sessions across `threads` workers and merges their tables.
///
/// The result equals [`count_nflows`] over the whole input for any thread count.
pub fn count_nflows_parallel(
    sessions: &[Session],
    n: usize,
    threads: usize,
) -> Result<FlowTable, MiningError> {
    let threads = threads.max(1);
    if threads == 1 || sessions.len() < 2 {
        return count_nflows(sessions, n);
    }
    let chunk = sessions.len().div_ceil(threads);
    let tables: Vec<Result<FlowTable, MiningError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = sessions
            .chunks(chunk)
            .map(|shard| scope.spawn(move || count_nflows(shard, n)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("counting worker panicked"))
            .collect()
    });
    let mut merged = FlowTable::empty(n, Vec::<&str>::new());
    for table in tables {
        merged = merge_tables(merged, table?)?;
    }
    Ok(merged)
}

/// Adds occurrence counts and unions contributor sets.
///
/// The merged user universe is the union of both inputs' universes.
pub fn merge_tables(a: FlowTable, b: FlowTable) -> Result<FlowTable, MiningError> {
    if a.n != b.n {
        return Err(MiningError::LengthMismatch(a.n, b.n));
    }
    let universe: Arc<[Arc<str>]> = if *a.users == *b.users {
        a.users.clone()
    } else {
        let mut all: Vec<Arc<str>> = a.users.iter().chain(b.users.iter()).cloned().collect();
        all.sort();
        all.dedup();
        all.into()
    };
    let (big, small) = if a.entries.len() >= b.entries.len() {
        (a, b)
    } else {
        (b, a)
    };
    let mut merged = big.remapped(&universe);
    let small = small.remapped(&universe);
    for (flow, c) in small.entries {
        match merged.entries.get_mut(&flow) {
            Some(existing) => {
                existing.occurrences += c.occurrences;
                existing.users = union_sorted(&existing.users, &c.users);
            }
            None => {
                merged.entries.insert(flow, c);
            }
        }
    }
    Ok(merged)
}

fn union_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// The `k` best flows of the table under the ranking order.
pub fn top_k(table: &FlowTable, k: usize) -> RankedFlows {
    if table.is_empty() {
        return RankedFlows {
            n: table.n,
            entries: Vec::new(),
        };
    }
    let mut stats = table.stats_unchecked();
    if k < stats.len() {
        stats.select_nth_unstable_by(k, rank_order);
        stats.truncate(k);
    }
    RankedFlows::new(table.n, stats)
}

/// Per-flow statistics in ranking order.
pub fn compute_stats(table: &FlowTable) -> Result<Vec<FlowStats>, MiningError> {
    if table.users.is_empty() {
        return Err(MiningError::NoUsers);
    }
    let mut stats = table.stats_unchecked();
    stats.sort_by(rank_order);
    Ok(stats)
}
