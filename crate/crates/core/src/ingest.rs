//! Event-log ingestion: parsing, session segmentation and repeat compression.
//!
//! Two line formats are accepted. CSV has the header
//! `user_id,tool_id,timestamp_ms`, no quoting and no embedded commas.
//! JSON-lines carries one object per line with the same three fields;
//! unknown fields are ignored. Both accept LF or CRLF endings.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::is_forbidden_id_char;

pub const CSV_HEADER: &str = "user_id,tool_id,timestamp_ms";
pub const DEFAULT_SESSION_GAP_MS: u64 = 300_000;
const MAX_REJECTION_SAMPLES: usize = 10;

/// One time-stamped tool invocation by one user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToolEvent {
    pub user_id: String,
    pub tool_id: String,
    pub timestamp_ms: i64,
}

impl ToolEvent {
    pub fn new(user_id: impl Into<String>, tool_id: impl Into<String>, timestamp_ms: i64) -> Self {
        ToolEvent {
            user_id: user_id.into(),
            tool_id: tool_id.into(),
            timestamp_ms,
        }
    }
}

/// A gap-bounded, time-ordered run of one user's events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user_id: String,
    pub events: Vec<ToolEvent>,
}

impl Session {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn tools(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.tool_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    #[default]
    Csv,
    JsonLines,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" | "json-lines" => Ok(InputFormat::JsonLines),
            other => Err(format!(
                "unknown input format {other:?} (expected csv or jsonl)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub session_gap_ms: u64,
    pub strict_mode: bool,
    pub format: InputFormat,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            session_gap_ms: DEFAULT_SESSION_GAP_MS,
            strict_mode: false,
            format: InputFormat::Csv,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.session_gap_ms == 0 {
            return Err(IngestError::InvalidConfig(
                "session_gap_ms must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Why a single input line was not turned into an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    WrongFieldCount,
    EmptyField,
    ForbiddenCharacter,
    NonIntegerTimestamp,
    NegativeTimestamp,
    InvalidUtf8,
    InvalidJson(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::WrongFieldCount => f.write_str("wrong field count"),
            RejectReason::EmptyField => f.write_str("empty identifier"),
            RejectReason::ForbiddenCharacter => f.write_str("forbidden character in identifier"),
            RejectReason::NonIntegerTimestamp => f.write_str("non-integer timestamp"),
            RejectReason::NegativeTimestamp => f.write_str("negative timestamp"),
            RejectReason::InvalidUtf8 => f.write_str("invalid utf-8"),
            RejectReason::InvalidJson(msg) => write!(f, "invalid json record: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub events_accepted: u64,
    pub lines_rejected: u64,
    /// The first few rejected lines as (1-based line number, reason).
    pub rejection_samples: Vec<(u64, String)>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error reading events: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: expected {CSV_HEADER:?}, found {0:?}")]
    MalformedHeader(String),
    #[error("line {line}: {reason}")]
    Line { line: u64, reason: RejectReason },
    #[error("invalid ingest config: {0}")]
    InvalidConfig(String),
}

fn strip_eol(mut line: &[u8]) -> &[u8] {
    if let Some(rest) = line.strip_suffix(b"\n") {
        line = rest;
    }
    if let Some(rest) = line.strip_suffix(b"\r") {
        line = rest;
    }
    line
}

fn check_id(id: &str) -> Result<(), RejectReason> {
    if id.is_empty() {
        return Err(RejectReason::EmptyField);
    }
    if id.chars().any(is_forbidden_id_char) {
        return Err(RejectReason::ForbiddenCharacter);
    }
    Ok(())
}

fn parse_timestamp(raw: &str) -> Result<i64, RejectReason> {
    let ts: i64 = raw.parse().map_err(|_| RejectReason::NonIntegerTimestamp)?;
    if ts < 0 {
        return Err(RejectReason::NegativeTimestamp);
    }
    Ok(ts)
}

fn parse_csv_line(line: &str) -> Result<ToolEvent, RejectReason> {
    let mut fields = line.split(',');
    let (Some(user), Some(tool), Some(ts), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err(RejectReason::WrongFieldCount);
    };
    check_id(user)?;
    check_id(tool)?;
    let timestamp_ms = parse_timestamp(ts)?;
    Ok(ToolEvent::new(user, tool, timestamp_ms))
}

fn parse_json_line(line: &str) -> Result<ToolEvent, RejectReason> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| RejectReason::InvalidJson(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| RejectReason::InvalidJson("expected an object".into()))?;
    let string_field = |name: &str| -> Result<&str, RejectReason> {
        match obj.get(name) {
            Some(serde_json::Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(RejectReason::InvalidJson(format!(
                "field {name:?} must be a string"
            ))),
            None => Err(RejectReason::WrongFieldCount),
        }
    };
    let user = string_field("user_id")?;
    let tool = string_field("tool_id")?;
    let timestamp_ms = match obj.get("timestamp_ms") {
        Some(serde_json::Value::Number(n)) => match n.as_i64() {
            Some(ts) if ts < 0 => return Err(RejectReason::NegativeTimestamp),
            Some(ts) => ts,
            None if n.as_u64().is_some() => return Err(RejectReason::NonIntegerTimestamp),
            None if n.as_f64().is_some_and(|f| f < 0.0) => {
                return Err(RejectReason::NegativeTimestamp)
            }
            None => return Err(RejectReason::NonIntegerTimestamp),
        },
        Some(_) => return Err(RejectReason::NonIntegerTimestamp),
        None => return Err(RejectReason::WrongFieldCount),
    };
    check_id(user)?;
    check_id(tool)?;
    Ok(ToolEvent::new(user, tool, timestamp_ms))
}

/// Parses an event log into events in input order.
///
/// In lenient mode malformed lines are skipped and tallied in the report; in
/// strict mode the first malformed line aborts with its line number. A bad CSV
/// header is always an error. Completely empty input yields no events.
pub fn parse_events<R: BufRead>(
    mut reader: R,
    config: &IngestConfig,
) -> Result<(Vec<ToolEvent>, IngestReport), IngestError> {
    config.validate()?;
    let mut events = Vec::new();
    let mut report = IngestReport::default();
    let mut buf = Vec::with_capacity(128);
    let mut line_no: u64 = 0;

    if config.format == InputFormat::Csv {
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok((events, report));
        }
        line_no = 1;
        let raw = strip_eol(&buf);
        let raw = raw.strip_prefix("\u{feff}".as_bytes()).unwrap_or(raw);
        if raw != CSV_HEADER.as_bytes() {
            return Err(IngestError::MalformedHeader(
                String::from_utf8_lossy(raw).into_owned(),
            ));
        }
    }

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let parsed = std::str::from_utf8(strip_eol(&buf))
            .map_err(|_| RejectReason::InvalidUtf8)
            .and_then(|line| match config.format {
                InputFormat::Csv => parse_csv_line(line),
                InputFormat::JsonLines => parse_json_line(line),
            });
        match parsed {
            Ok(event) => {
                events.push(event);
                report.events_accepted += 1;
            }
            Err(reason) if config.strict_mode => {
                return Err(IngestError::Line {
                    line: line_no,
                    reason,
                });
            }
            Err(reason) => {
                report.lines_rejected += 1;
                if report.rejection_samples.len() < MAX_REJECTION_SAMPLES {
                    report.rejection_samples.push((line_no, reason.to_string()));
                }
            }
        }
    }
    Ok((events, report))
}

/// Groups events per user, orders them by time and splits on idle gaps.
///
/// Ties on timestamp keep input order. Sessions come out ordered by user id,
/// then time.
pub fn segment_sessions(mut events: Vec<ToolEvent>, config: &IngestConfig) -> Vec<Session> {
    let gap = config.session_gap_ms;
    events.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp_ms.cmp(&b.timestamp_ms))
    });

    let mut sessions: Vec<Session> = Vec::new();
    for event in events {
        let split = match sessions.last() {
            Some(current) => {
                let last = current.events.last().expect("sessions are never empty");
                last.user_id != event.user_id
                    || (event.timestamp_ms as i128 - last.timestamp_ms as i128) > gap as i128
            }
            None => true,
        };
        if split {
            sessions.push(Session {
                user_id: event.user_id.clone(),
                events: vec![event],
            });
        } else {
            sessions.last_mut().unwrap().events.push(event);
        }
    }
    sessions
}

/// Collapses every run of consecutive identical tools to its first event.
pub fn compress_repeats(mut session: Session) -> Session {
    session
        .events
        .dedup_by(|later, earlier| later.tool_id == earlier.tool_id);
    session
}

/// Applies [`compress_repeats`] to every session.
pub fn compress_all(sessions: Vec<Session>) -> Vec<Session> {
    sessions.into_iter().map(compress_repeats).collect()
}
