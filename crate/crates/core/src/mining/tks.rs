//! Top-K sequential pattern mining over sessions with a max-gap constraint.
//!
//! Patterns are grown one tool at a time from their prefixes. Each pattern
//! carries a vertical occurrence index: the sorted list of `(session, end)`
//! positions where a match ends, with the number of distinct position tuples
//! ending there. Extending by a tool joins that index with the tool's own
//! occurrence list.
//!
//! No minimum support is supplied. Each length keeps its current best `k`
//! patterns, and the k-th best occurrence count acts as a floor that rises as
//! better patterns turn up. A pattern of length `m` with `c` occurrences can
//! have at most `c * (max_gap + 1)^(n - m)` occurrences after growing to
//! length `n`, so prefixes whose bound falls below every relevant floor are
//! never extended. Candidates are explored best-first so the floors climb early.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::encode::Encoded;
use super::{rank_order, FlowStats, MiningConfig, MiningError, RankedFlows};
use crate::flow::Flow;
use crate::ingest::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Occurrence {
    session: u32,
    end: u32,
    /// Number of distinct position tuples ending at `end`.
    tuples: u64,
}

impl Occurrence {
    fn key(&self) -> (u32, u32) {
        (self.session, self.end)
    }
}

struct Pattern {
    tools: Vec<u32>,
    index: Vec<Occurrence>,
    occurrences: u64,
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pattern {}

impl Ord for Pattern {
    // Max-heap: most occurrences first, then shorter, then smaller tool ids.
    fn cmp(&self, other: &Self) -> Ordering {
        self.occurrences
            .cmp(&other.occurrences)
            .then(other.tools.len().cmp(&self.tools.len()))
            .then_with(|| other.tools.cmp(&self.tools))
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Ranked(FlowStats);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The best `k` patterns of one length seen so far.
struct TopList {
    k: usize,
    best: BTreeSet<Ranked>,
}

impl TopList {
    fn floor(&self) -> u64 {
        if self.best.len() < self.k {
            0
        } else {
            self.best.last().map_or(0, |r| r.0.occurrences)
        }
    }

    fn offer(&mut self, stats: FlowStats) {
        let candidate = Ranked(stats);
        if self.best.len() < self.k {
            self.best.insert(candidate);
        } else if self.best.last().is_some_and(|worst| candidate < *worst) {
            self.best.insert(candidate);
            self.best.pop_last();
        }
    }
}

struct Miner<'a> {
    enc: &'a Encoded,
    gap: usize,
    n_min: usize,
    n_max: usize,
    tops: Vec<TopList>,
    tool_index: Vec<Vec<Occurrence>>,
    user_stamp: Vec<u32>,
    stamp: u32,
}

impl<'a> Miner<'a> {
    fn new(enc: &'a Encoded, config: &MiningConfig) -> Self {
        let mut tool_index = vec![Vec::new(); enc.tools.len()];
        for (s, seq) in enc.sessions.iter().enumerate() {
            for (pos, &t) in seq.iter().enumerate() {
                tool_index[t as usize].push(Occurrence {
                    session: s as u32,
                    end: pos as u32,
                    tuples: 1,
                });
            }
        }
        Miner {
            enc,
            gap: config.max_gap,
            n_min: config.n_min,
            n_max: config.n_max,
            tops: (config.n_min..=config.n_max)
                .map(|_| TopList {
                    k: config.k,
                    best: BTreeSet::new(),
                })
                .collect(),
            tool_index,
            user_stamp: vec![0; enc.users.len()],
            stamp: 0,
        }
    }

    fn floor(&self, n: usize) -> u64 {
        self.tops[n - self.n_min].floor()
    }

    /// Upper bound on the occurrences of any length-`n` extension.
    fn bound(&self, occurrences: u64, len: usize, n: usize) -> u64 {
        let fanout = (self.gap as u64 + 1).saturating_pow((n - len) as u32);
        occurrences.saturating_mul(fanout)
    }

    /// Whether a pattern may enter its own top list, and whether it may still
    /// lead to a pattern that enters a longer one.
    fn worth(&self, occurrences: u64, len: usize) -> (bool, bool) {
        let offer = (self.n_min..=self.n_max).contains(&len) && occurrences >= self.floor(len);
        let expand = len < self.n_max
            && ((len + 1).max(self.n_min)..=self.n_max)
                .any(|n| self.bound(occurrences, len, n) >= self.floor(n));
        (offer, expand)
    }

    fn distinct_users(&mut self, index: &[Occurrence]) -> u64 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.user_stamp.iter_mut().for_each(|s| *s = 0);
            self.stamp = 1;
        }
        let mut distinct = 0;
        for occ in index {
            let user = self.enc.session_user[occ.session as usize] as usize;
            if self.user_stamp[user] != self.stamp {
                self.user_stamp[user] = self.stamp;
                distinct += 1;
            }
        }
        distinct
    }

    fn offer(&mut self, pattern: &Pattern) {
        let distinct_users = self.distinct_users(&pattern.index);
        let stats = FlowStats {
            flow: Flow::from_shared(self.enc.tool_names(&pattern.tools)),
            occurrences: pattern.occurrences,
            distinct_users,
            user_coverage: distinct_users as f64 / self.enc.users.len() as f64,
        };
        self.tops[pattern.tools.len() - self.n_min].offer(stats);
    }

    /// Tools found within the gap window after some end of `index`, ascending.
    fn candidate_tools(&self, index: &[Occurrence]) -> Vec<u32> {
        let mut tools = Vec::new();
        for occ in index {
            let seq = &self.enc.sessions[occ.session as usize];
            let start = occ.end as usize + 1;
            let stop = (start + self.gap + 1).min(seq.len());
            if start < stop {
                tools.extend_from_slice(&seq[start..stop]);
            }
        }
        tools.sort_unstable();
        tools.dedup();
        tools
    }

    /// Joins a prefix index with a tool's occurrence list.
    fn extend(&self, prefix: &[Occurrence], tool: &[Occurrence]) -> Vec<Occurrence> {
        let gap = self.gap as u32;
        let mut out = Vec::new();
        let linear = prefix.len().saturating_add(tool.len())
            <= prefix
                .len()
                .saturating_mul(usize::BITS as usize - tool.len().leading_zeros() as usize);
        if linear {
            // Sliding window per session over both sorted lists.
            let (mut i, mut j) = (0, 0);
            while i < prefix.len() && j < tool.len() {
                let (ps, ts) = (prefix[i].session, tool[j].session);
                if ps < ts {
                    i += prefix[i..].partition_point(|o| o.session < ts);
                    continue;
                }
                if ts < ps {
                    j += tool[j..].partition_point(|o| o.session < ps);
                    continue;
                }
                let p_end = i + prefix[i..].partition_point(|o| o.session == ps);
                let t_end = j + tool[j..].partition_point(|o| o.session == ts);
                let (mut lo, mut hi, mut sum) = (i, i, 0u64);
                for q in &tool[j..t_end] {
                    while hi < p_end && prefix[hi].end < q.end {
                        sum += prefix[hi].tuples;
                        hi += 1;
                    }
                    while lo < hi && prefix[lo].end + 1 + gap < q.end {
                        sum -= prefix[lo].tuples;
                        lo += 1;
                    }
                    if sum > 0 {
                        out.push(Occurrence {
                            session: q.session,
                            end: q.end,
                            tuples: sum,
                        });
                    }
                }
                i = p_end;
                j = t_end;
            }
        } else {
            // Short prefix against a long list: binary-search forward per entry.
            let mut cursor = 0;
            for p in prefix {
                cursor += tool[cursor..].partition_point(|o| o.key() <= p.key());
                let limit = p.end.saturating_add(1 + gap);
                for q in tool[cursor..]
                    .iter()
                    .take_while(|o| o.session == p.session && o.end <= limit)
                {
                    out.push(Occurrence {
                        session: q.session,
                        end: q.end,
                        tuples: p.tuples,
                    });
                }
            }
            if gap > 0 {
                out.sort_unstable_by_key(Occurrence::key);
                out.dedup_by(|later, earlier| {
                    if later.key() == earlier.key() {
                        earlier.tuples += later.tuples;
                        true
                    } else {
                        false
                    }
                });
            }
        }
        out
    }

    fn run(mut self) -> Vec<RankedFlows> {
        let mut frontier = BinaryHeap::new();
        for t in 0..self.enc.tools.len() {
            let index = self.tool_index[t].clone();
            let pattern = Pattern {
                tools: vec![t as u32],
                occurrences: index.len() as u64,
                index,
            };
            if self.worth(pattern.occurrences, 1).0 {
                self.offer(&pattern);
            }
            frontier.push(pattern);
        }

        while let Some(prefix) = frontier.pop() {
            let len = prefix.tools.len();
            if !self.worth(prefix.occurrences, len).1 {
                continue;
            }
            let child_bound = prefix.occurrences.saturating_mul(self.gap as u64 + 1);
            for t in self.candidate_tools(&prefix.index) {
                let (offer, expand) = self.worth(child_bound, len + 1);
                if !offer && !expand {
                    break;
                }
                let index = self.extend(&prefix.index, &self.tool_index[t as usize]);
                if index.is_empty() {
                    continue;
                }
                let occurrences = index.iter().map(|o| o.tuples).sum();
                let mut tools = prefix.tools.clone();
                tools.push(t);
                let child = Pattern {
                    tools,
                    index,
                    occurrences,
                };
                let (offer, expand) = self.worth(occurrences, len + 1);
                if offer {
                    self.offer(&child);
                }
                if expand {
                    frontier.push(child);
                }
            }
        }

        let n_min = self.n_min;
        self.tops
            .into_iter()
            .enumerate()
            .map(|(i, top)| RankedFlows {
                n: n_min + i,
                entries: top.best.into_iter().map(|r| r.0).collect(),
            })
            .collect()
    }
}

/// Mines the top-`k` flows of every length in `n_min..=n_max`.
///
/// A flow matches at positions `p1 < ... < pn` of a session when each step
/// skips at most `max_gap` events; occurrences count distinct position
/// tuples. With `max_gap = 0` the result is identical to
/// [`count_nflows`](super::count_nflows) followed by [`top_k`](super::top_k).
pub fn mine_tks(
    sessions: &[Session],
    config: &MiningConfig,
) -> Result<Vec<RankedFlows>, MiningError> {
    config.validate()?;
    let enc = Encoded::new(sessions);
    if enc.users.is_empty() {
        return Ok((config.n_min..=config.n_max)
            .map(|n| RankedFlows {
                n,
                entries: Vec::new(),
            })
            .collect());
    }
    Ok(Miner::new(&enc, config).run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ToolEvent;

    fn sessions(seqs: &[&[&str]]) -> Vec<Session> {
        seqs.iter()
            .enumerate()
            .map(|(i, tools)| Session {
                user_id: format!("u{i}"),
                events: tools
                    .iter()
                    .enumerate()
                    .map(|(j, t)| ToolEvent::new(format!("u{i}"), *t, j as i64))
                    .collect(),
            })
            .collect()
    }

    fn mined(seqs: &[&[&str]], n: usize, k: usize, max_gap: usize) -> Vec<(String, u64)> {
        let config = MiningConfig {
            n_min: n,
            n_max: n,
            k,
            max_gap,
            ..Default::default()
        };
        let out = mine_tks(&sessions(seqs), &config).unwrap();
        out[0]
            .entries
            .iter()
            .map(|e| (e.flow.to_string(), e.occurrences))
            .collect()
    }

    fn pairs(items: &[(&str, u64)]) -> Vec<(String, u64)> {
        items.iter().map(|(f, c)| (f.to_string(), *c)).collect()
    }

    #[test]
    fn contiguous_pairs() {
        assert_eq!(
            mined(&[&["A", "B", "C"]], 2, 10, 0),
            pairs(&[("A/B", 1), ("B/C", 1)])
        );
    }

    #[test]
    fn gap_of_one() {
        assert_eq!(
            mined(&[&["A", "B", "C"]], 2, 10, 1),
            pairs(&[("A/B", 1), ("A/C", 1), ("B/C", 1)])
        );
    }

    #[test]
    fn gap_of_two_over_four_tools() {
        let got = mined(&[&["A", "B", "C", "D"]], 2, 10, 2);
        assert_eq!(
            got,
            pairs(&[
                ("A/B", 1),
                ("A/C", 1),
                ("A/D", 1),
                ("B/C", 1),
                ("B/D", 1),
                ("C/D", 1)
            ])
        );
    }

    #[test]
    fn gapped_counts_distinct_tuples() {
        // A B B with gap 1: A/B matches at (0,1) and (0,2).
        assert_eq!(
            mined(&[&["A", "B", "B"]], 2, 10, 1),
            pairs(&[("A/B", 2), ("B/B", 1)])
        );
        // A A B B with gap 1: (0,2) (1,2) (1,3) → 3 tuples.
        assert_eq!(
            mined(&[&["A", "A", "B", "B"]], 2, 1, 1),
            pairs(&[("A/B", 3)])
        );
    }

    #[test]
    fn k_truncates_by_rank() {
        let got = mined(&[&["A", "B", "A", "B", "C"]], 2, 1, 0);
        assert_eq!(got, pairs(&[("A/B", 2)]));
    }

    #[test]
    fn every_length_gets_a_list() {
        let config = MiningConfig {
            n_min: 1,
            n_max: 3,
            k: 5,
            ..Default::default()
        };
        let out = mine_tks(&sessions(&[&["A", "B", "A", "B"]]), &config).unwrap();
        assert_eq!(out.iter().map(|r| r.n).collect::<Vec<_>>(), [1, 2, 3]);
        let three: Vec<_> = out[2].flows().map(Flow::to_string).collect();
        assert_eq!(three, ["A/B/A", "B/A/B"]);
        assert_eq!(out[0].entries[0].occurrences, 2);
    }

    #[test]
    fn empty_input_and_invalid_config() {
        let out = mine_tks(&[], &MiningConfig::default()).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(RankedFlows::is_empty));
        let bad = MiningConfig {
            k: 0,
            ..Default::default()
        };
        assert!(mine_tks(&[], &bad).is_err());
    }

    #[test]
    fn distinct_users_are_counted() {
        let config = MiningConfig {
            n_min: 2,
            n_max: 2,
            k: 5,
            ..Default::default()
        };
        let out = mine_tks(
            &sessions(&[&["Copy", "Paste"], &["Copy", "Paste", "Copy", "Paste"]]),
            &config,
        )
        .unwrap();
        let top = &out[0].entries[0];
        assert_eq!(top.flow.to_string(), "Copy/Paste");
        assert_eq!((top.occurrences, top.distinct_users), (3, 2));
        assert_eq!(top.user_coverage, 1.0);
    }
}
