use std::collections::HashSet;
use std::io::Write;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::Flow;
use crate::ingest::{ToolEvent, CSV_HEADER, DEFAULT_SESSION_GAP_MS};

const EVENT_SPACING_MS: i64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub users: usize,
    pub sessions_per_user: RangeInclusive<usize>,
    /// Minimum number of events per session. Units are never split, so a
    /// session can overshoot by up to one planted flow or duplicated pair.
    pub session_length: RangeInclusive<usize>,
    pub background_vocab: usize,
    /// Planted flows with the per-step probability of emitting each one.
    pub planted: Vec<(Flow, f64)>,
    /// Probability that a background event is immediately repeated.
    pub repeat_noise_rate: f64,
    pub seed: u64,
    /// Sessions are separated by twice this gap.
    pub session_gap_ms: u64,
}

/// `Copy/Paste`, `Paste/Copy/Paste` and `Copy/Paste/Copy/Paste` at small rates.
pub fn default_planted() -> Vec<(Flow, f64)> {
    [
        ("Copy/Paste", 0.05),
        ("Paste/Copy/Paste", 0.03),
        ("Copy/Paste/Copy/Paste", 0.02),
    ]
    .into_iter()
    .map(|(f, r)| (Flow::parse(f).expect("valid flow"), r))
    .collect()
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            users: 100,
            sessions_per_user: 1..=3,
            session_length: 20..=60,
            background_vocab: 50,
            planted: default_planted(),
            repeat_noise_rate: 0.0,
            seed: 0,
            session_gap_ms: DEFAULT_SESSION_GAP_MS,
        }
    }
}

impl CorpusSpec {
    pub fn background_tool(i: usize) -> String {
        format!("bg{i:04}")
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::InvalidSpec(msg));
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if self.users == 0 {
            return bad("users must be at least 1".into());
        }
        for (name, range) in [
            ("sessions_per_user", &self.sessions_per_user),
            ("session_length", &self.session_length),
        ] {
            if *range.start() == 0 || range.start() > range.end() {
                return bad(format!(
                    "{name} must be a non-empty range of positive values"
                ));
            }
        }
        if self.background_vocab == 0 {
            return bad("background_vocab must be at least 1".into());
        }
        if self.session_gap_ms == 0 {
            return bad("session_gap_ms must be positive".into());
        }
        if !rate_ok(self.repeat_noise_rate) {
            return bad(format!(
                "repeat_noise_rate {} is outside [0, 1]",
                self.repeat_noise_rate
            ));
        }
        let background: HashSet<String> = (0..self.background_vocab)
            .map(Self::background_tool)
            .collect();
        let mut total = 0.0;
        for (flow, rate) in &self.planted {
            if !rate_ok(*rate) {
                return bad(format!(
                    "injection rate {rate} for {flow} is outside [0, 1]"
                ));
            }
            if let Some(t) = flow.tools().iter().find(|t| background.contains(&***t)) {
                return bad(format!(
                    "planted tool {t} collides with a background tool name"
                ));
            }
            total += rate;
        }
        if total > 1.0 + 1e-12 {
            return bad(format!("injection rates sum to {total}, more than 1"));
        }
        Ok(())
    }
}

/// Generates a deterministic event stream for `spec`.
///
/// Each session is built step by step: with each planted flow's injection
/// rate the whole flow is emitted, otherwise one uniformly drawn background
/// tool (never the same background tool twice in a row), duplicated with
/// `repeat_noise_rate`. Events in a session are 1000 ms apart.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<ToolEvent>, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background: Vec<String> = (0..spec.background_vocab)
        .map(CorpusSpec::background_tool)
        .collect();
    let session_gap = spec.session_gap_ms as i64 * 2;
    let width = (spec.users - 1).to_string().len().max(4);
    let mut events = Vec::new();

    for u in 0..spec.users {
        let user = format!("u{u:0width$}");
        let mut clock: i64 = 0;
        let sessions = rng.random_range(spec.sessions_per_user.clone());
        for _ in 0..sessions {
            let target_len = rng.random_range(spec.session_length.clone());
            let mut tools: Vec<&str> = Vec::with_capacity(target_len + 4);
            let mut last_background: Option<usize> = None;
            while tools.len() < target_len {
                let draw: f64 = rng.random();
                let mut acc = 0.0;
                let planted = spec.planted.iter().find(|(_, rate)| {
                    acc += rate;
                    draw < acc
                });
                match planted {
                    Some((flow, _)) => {
                        tools.extend(flow.tools().iter().map(|t| &**t));
                        last_background = None;
                    }
                    None => {
                        let idx = match last_background {
                            Some(prev) if background.len() > 1 => {
                                let i = rng.random_range(0..background.len() - 1);
                                if i >= prev {
                                    i + 1
                                } else {
                                    i
                                }
                            }
                            _ => rng.random_range(0..background.len()),
                        };
                        tools.push(&background[idx]);
                        if rng.random::<f64>() < spec.repeat_noise_rate {
                            tools.push(&background[idx]);
                        }
                        last_background = Some(idx);
                    }
                }
            }
            for tool in tools {
                events.push(ToolEvent::new(user.clone(), tool, clock));
                clock += EVENT_SPACING_MS;
            }
            clock += session_gap - EVENT_SPACING_MS;
        }
    }
    Ok(events)
}

/// Writes events as canonical CSV.
pub fn write_csv<W: Write>(mut out: W, events: &[ToolEvent]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{}", e.user_id, e.tool_id, e.timestamp_ms)?;
    }
    out.flush()
}
