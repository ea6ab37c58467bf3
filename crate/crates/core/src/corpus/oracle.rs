use std::collections::{BTreeSet, HashMap};

use crate::flow::Flow;
use crate::ingest::Session;
use crate::mining::{FlowStats, RankedFlows};

/// Exhaustive reference top-k.
///
/// Enumerates every position tuple `p1 < ... < pn` of every session whose
/// steps skip at most `max_gap` events, tallies tuples and users per tool
/// sequence, and sorts by (occurrences desc, users desc, joined text asc).
/// Cost grows as `(max_gap + 1)^(n - 1)` per start position, so keep inputs small.
pub fn oracle_topk(sessions: &[Session], n: usize, k: usize, max_gap: usize) -> RankedFlows {
    let users: BTreeSet<&str> = sessions.iter().map(|s| s.user_id.as_str()).collect();
    let mut tally: HashMap<Vec<&str>, (u64, BTreeSet<&str>)> = HashMap::new();
    if n > 0 {
        for session in sessions {
            let tools: Vec<&str> = session.tools().collect();
            let mut positions = Vec::with_capacity(n);
            for start in 0..tools.len() {
                positions.push(start);
                enumerate(&tools, n, max_gap, &mut positions, &mut |tuple| {
                    let key: Vec<&str> = tuple.iter().map(|&p| tools[p]).collect();
                    let slot = tally.entry(key).or_default();
                    slot.0 += 1;
                    slot.1.insert(&session.user_id);
                });
                positions.pop();
            }
        }
    }

    let mut rows: Vec<(String, Vec<&str>, u64, u64)> = tally
        .into_iter()
        .map(|(tools, (occ, who))| (tools.join("/"), tools, occ, who.len() as u64))
        .collect();
    rows.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(b.3.cmp(&a.3))
            .then_with(|| a.0.cmp(&b.0))
    });
    rows.truncate(k);
    let total = users.len() as f64;
    RankedFlows {
        n,
        entries: rows
            .into_iter()
            .map(|(_, tools, occ, distinct)| FlowStats {
                flow: Flow::new(tools).expect("tools come from validated events"),
                occurrences: occ,
                distinct_users: distinct,
                user_coverage: distinct as f64 / total,
            })
            .collect(),
    }
}

fn enumerate(
    tools: &[&str],
    n: usize,
    max_gap: usize,
    positions: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if positions.len() == n {
        emit(positions);
        return;
    }
    let last = *positions.last().expect("seeded with a start position");
    for next in (last + 1)..=(last + 1 + max_gap) {
        if next >= tools.len() {
            break;
        }
        positions.push(next);
        enumerate(tools, n, max_gap, positions, emit);
        positions.pop();
    }
}
