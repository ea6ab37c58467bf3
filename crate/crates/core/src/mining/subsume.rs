use std::collections::HashMap;

use super::{MiningError, RankedFlows};
use crate::flow::Flow;

/// Drops n-flows that are redundant with a frequent (n+1)-flow.
///
/// An n-flow `F` is removed when some listed (n+1)-flow `G` contains `F` as a
/// contiguous run and `occurrences(G) >= theta * occurrences(F)`. Every
/// supplied (n+1)-flow can subsume, including one that is itself removed, so
/// a chain like `Copy/Paste ⊂ Paste/Copy/Paste ⊂ Copy/Paste/Copy/Paste`
/// collapses to its longest member. Lists keep their order.
pub fn filter_subsumed(
    ranked: &[RankedFlows],
    theta: f64,
) -> Result<Vec<RankedFlows>, MiningError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(MiningError::InvalidTheta(theta));
    }
    // For each flow of length n, the largest occurrence count among the
    // (n+1)-flows it sits inside. Contiguous n-runs of an (n+1)-flow are
    // exactly its prefix and suffix.
    let mut best_parent: HashMap<Flow, u64> = HashMap::new();
    for list in ranked {
        for entry in &list.entries {
            for sub in [entry.flow.prefix(), entry.flow.suffix()]
                .into_iter()
                .flatten()
            {
                let slot = best_parent.entry(sub).or_insert(0);
                *slot = (*slot).max(entry.occurrences);
            }
        }
    }
    Ok(ranked
        .iter()
        .map(|list| RankedFlows {
            n: list.n,
            entries: list
                .entries
                .iter()
                .filter(|e| {
                    let parent = best_parent.get(&e.flow).copied().unwrap_or(0);
                    parent == 0 || (parent as f64) < theta * e.occurrences as f64
                })
                .cloned()
                .collect(),
        })
        .collect())
}
