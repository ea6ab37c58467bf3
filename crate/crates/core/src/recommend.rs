//! Per-user flow profiles and workflow recommendation.
//!
//! Two strategies are offered. `popular` suggests the flows used by the most
//! people that the target has not used. `cf` is user-based collaborative
//! filtering: the target's nearest neighbours by cosine similarity vote for
//! flows they use, weighted by similarity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::Flow;
use crate::ingest::Session;
use crate::mining::FlowStats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecommendError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("the flow vocabulary is empty")]
    EmptyVocabulary,
    #[error("collaborative filtering needs at least one other user profile")]
    NotEnoughProfiles,
    #[error("invalid recommend config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Popular,
    Cf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Popular => "popular",
            Method::Cf => "cf",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "popular" => Ok(Method::Popular),
            "cf" => Ok(Method::Cf),
            other => Err(format!("unknown method {other:?} (expected popular or cf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendConfig {
    pub count: usize,
    pub method: Method,
    pub neighbors_m: usize,
    /// A user "uses" a flow once their count reaches this value.
    pub usage_threshold: u64,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            count: 10,
            method: Method::Popular,
            neighbors_m: 10,
            usage_threshold: 1,
        }
    }
}

impl RecommendConfig {
    pub fn validate(&self) -> Result<(), RecommendError> {
        let bad = |msg: &str| Err(RecommendError::InvalidConfig(msg.into()));
        if self.count < 1 {
            return bad("count must be at least 1");
        }
        if self.neighbors_m < 1 {
            return bad("neighbors must be at least 1");
        }
        if self.usage_threshold < 1 {
            return bad("usage threshold must be at least 1");
        }
        Ok(())
    }
}

/// One user's occurrence counts over the flow vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    /// Non-zero counts only; an absent flow has count 0.
    pub flow_counts: BTreeMap<Flow, u64>,
    pub total_events: u64,
}

impl UserProfile {
    pub fn count(&self, flow: &Flow) -> u64 {
        self.flow_counts.get(flow).copied().unwrap_or(0)
    }

    fn uses(&self, flow: &Flow, threshold: u64) -> bool {
        self.count(flow) >= threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rank: usize,
    pub flow: Flow,
    pub score: f64,
    pub method: Method,
}

/// Counts each user's contiguous windows that belong to `vocabulary`.
///
/// Every user with a session gets a profile, even when all counts are zero.
/// Profiles come back ordered by user id.
pub fn build_profiles(
    sessions: &[Session],
    vocabulary: &[Flow],
) -> Result<Vec<UserProfile>, RecommendError> {
    if vocabulary.is_empty() {
        return Err(RecommendError::EmptyVocabulary);
    }
    let mut by_len: BTreeMap<usize, HashMap<Vec<&str>, &Flow>> = BTreeMap::new();
    for flow in vocabulary {
        let key = flow.tools().iter().map(|t| &**t).collect();
        by_len.entry(flow.len()).or_default().insert(key, flow);
    }

    let mut profiles: BTreeMap<&str, UserProfile> = BTreeMap::new();
    let mut key: Vec<&str> = Vec::new();
    for session in sessions {
        let profile = profiles
            .entry(&session.user_id)
            .or_insert_with(|| UserProfile {
                user_id: session.user_id.clone(),
                flow_counts: BTreeMap::new(),
                total_events: 0,
            });
        profile.total_events += session.len() as u64;
        let tools: Vec<&str> = session.tools().collect();
        for (&n, lookup) in &by_len {
            for window in tools.windows(n) {
                key.clear();
                key.extend_from_slice(window);
                if let Some(flow) = lookup.get(&key) {
                    *profile.flow_counts.entry((*flow).clone()).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(profiles.into_values().collect())
}

fn find<'a>(profiles: &'a [UserProfile], user_id: &str) -> Result<&'a UserProfile, RecommendError> {
    profiles
        .iter()
        .find(|p| p.user_id == user_id)
        .ok_or_else(|| RecommendError::UnknownUser(user_id.to_string()))
}

fn ranked(scored: Vec<(Flow, f64)>, method: Method) -> Vec<Recommendation> {
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (flow, score))| Recommendation {
            rank: i + 1,
            flow,
            score,
            method,
        })
        .collect()
}

/// Most-popular flows the target user does not use yet.
///
/// Candidates rank by distinct users, then occurrences, then canonical text;
/// the score is the distinct-user count.
pub fn recommend_popular(
    profiles: &[UserProfile],
    stats: &[FlowStats],
    user_id: &str,
    config: &RecommendConfig,
) -> Result<Vec<Recommendation>, RecommendError> {
    config.validate()?;
    let target = find(profiles, user_id)?;
    let mut candidates: Vec<&FlowStats> = stats
        .iter()
        .filter(|s| !target.uses(&s.flow, config.usage_threshold))
        .collect();
    candidates.sort_by(|a, b| {
        b.distinct_users
            .cmp(&a.distinct_users)
            .then(b.occurrences.cmp(&a.occurrences))
            .then_with(|| a.flow.cmp(&b.flow))
    });
    candidates.dedup_by(|a, b| a.flow == b.flow);
    candidates.truncate(config.count);
    Ok(ranked(
        candidates
            .into_iter()
            .map(|s| (s.flow.clone(), s.distinct_users as f64))
            .collect(),
        Method::Popular,
    ))
}

/// Cosine similarity of two profiles' count vectors; 0 when either is all zero.
pub fn cosine_similarity(a: &UserProfile, b: &UserProfile) -> f64 {
    let mut dot = 0.0;
    let mut left = a.flow_counts.iter().peekable();
    let mut right = b.flow_counts.iter().peekable();
    // Walk both maps in key order so the sum is identical for (a, b) and (b, a).
    while let (Some((fa, ca)), Some((fb, cb))) = (left.peek(), right.peek()) {
        match fa.cmp(fb) {
            Ordering::Less => {
                left.next();
            }
            Ordering::Greater => {
                right.next();
            }
            Ordering::Equal => {
                dot += **ca as f64 * **cb as f64;
                left.next();
                right.next();
            }
        }
    }
    let norm = |p: &UserProfile| {
        p.flow_counts
            .values()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    };
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// User-based collaborative filtering.
///
/// The `neighbors_m` most similar other users (ties by user id) each add
/// their similarity to every flow they use that the target does not.
/// Zero-score flows are dropped.
pub fn recommend_cf(
    profiles: &[UserProfile],
    user_id: &str,
    config: &RecommendConfig,
) -> Result<Vec<Recommendation>, RecommendError> {
    config.validate()?;
    let target = find(profiles, user_id)?;
    let mut neighbors: Vec<(f64, &UserProfile)> = profiles
        .iter()
        .filter(|p| p.user_id != target.user_id)
        .map(|p| (cosine_similarity(target, p), p))
        .collect();
    if neighbors.is_empty() {
        return Err(RecommendError::NotEnoughProfiles);
    }
    neighbors.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| a.1.user_id.cmp(&b.1.user_id))
    });
    neighbors.truncate(config.neighbors_m);

    let mut scores: BTreeMap<&Flow, f64> = BTreeMap::new();
    for (similarity, neighbor) in neighbors.iter().filter(|(s, _)| *s > 0.0) {
        for (flow, &count) in &neighbor.flow_counts {
            if count >= config.usage_threshold && !target.uses(flow, config.usage_threshold) {
                *scores.entry(flow).or_insert(0.0) += similarity;
            }
        }
    }
    let mut scored: Vec<(Flow, f64)> = scores
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(f, s)| (f.clone(), s))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(config.count);
    Ok(ranked(scored, Method::Cf))
}

/// Dispatches on `config.method`.
pub fn recommend(
    profiles: &[UserProfile],
    stats: &[FlowStats],
    user_id: &str,
    config: &RecommendConfig,
) -> Result<Vec<Recommendation>, RecommendError> {
    match config.method {
        Method::Popular => recommend_popular(profiles, stats, user_id, config),
        Method::Cf => recommend_cf(profiles, user_id, config),
    }
}
