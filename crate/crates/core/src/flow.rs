//! The n-flow: an ordered run of tools used one after another.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Separator used in the canonical text form of a flow.
pub const FLOW_SEPARATOR: char = '/';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("a flow needs at least one tool")]
    Empty,
    #[error("empty tool name at position {0}")]
    EmptyTool(usize),
    #[error("tool name {0:?} contains a forbidden character")]
    ForbiddenCharacter(String),
}

/// Returns true when `c` may not appear inside a tool or user identifier.
pub(crate) fn is_forbidden_id_char(c: char) -> bool {
    matches!(c, '\n' | '\r' | ',' | '/')
}

/// An ordered sequence of tool identifiers.
///
/// Equality and hashing are by tool sequence. Ordering is by canonical text
/// (`tools.join("/")`) compared bytewise, which is the tail of the ranking
/// tie-break, so `Ord` is not the same as comparing tool by tool.
#[derive(Clone)]
pub struct Flow {
    tools: Arc<[Arc<str>]>,
}

impl Flow {
    /// Builds a flow, validating each tool name.
    pub fn new<I, S>(tools: I) -> Result<Self, FlowError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tools: Vec<Arc<str>> = tools.into_iter().map(|t| Arc::from(t.as_ref())).collect();
        if tools.is_empty() {
            return Err(FlowError::Empty);
        }
        for (i, t) in tools.iter().enumerate() {
            if t.is_empty() {
                return Err(FlowError::EmptyTool(i));
            }
            if t.chars().any(is_forbidden_id_char) {
                return Err(FlowError::ForbiddenCharacter(t.to_string()));
            }
        }
        Ok(Flow {
            tools: tools.into(),
        })
    }

    /// Builds a flow from already-validated, shared tool names.
    pub(crate) fn from_shared(tools: Vec<Arc<str>>) -> Self {
        debug_assert!(!tools.is_empty());
        Flow {
            tools: tools.into(),
        }
    }

    /// Parses the canonical "/"-joined form.
    pub fn parse(text: &str) -> Result<Self, FlowError> {
        Flow::new(text.split(FLOW_SEPARATOR))
    }

    /// Number of tools (the `n` of an n-flow).
    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn tools(&self) -> &[Arc<str>] {
        &self.tools
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// True if two consecutive tools are the same.
    pub fn has_adjacent_repeat(&self) -> bool {
        self.tools.windows(2).any(|w| w[0] == w[1])
    }

    /// True for flows of length ≥ 2 made of a single tool, e.g. `Save/Save/Save`.
    pub fn is_constant(&self) -> bool {
        self.tools.len() >= 2 && self.tools.iter().all(|t| *t == self.tools[0])
    }

    /// True if `self` occurs as a contiguous run inside `other`.
    pub fn is_contiguous_in(&self, other: &Flow) -> bool {
        let n = self.tools.len();
        n <= other.tools.len() && other.tools.windows(n).any(|w| w == &*self.tools)
    }

    /// The flow without its last tool, or `None` for a 1-flow.
    pub fn prefix(&self) -> Option<Flow> {
        (self.len() > 1).then(|| Flow {
            tools: self.tools[..self.len() - 1].into(),
        })
    }

    /// The flow without its first tool, or `None` for a 1-flow.
    pub fn suffix(&self) -> Option<Flow> {
        (self.len() > 1).then(|| Flow {
            tools: self.tools[1..].into(),
        })
    }

    fn canonical_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        self.tools.iter().enumerate().flat_map(|(i, t)| {
            let sep = (i > 0).then_some(FLOW_SEPARATOR as u8);
            sep.into_iter().chain(t.bytes())
        })
    }
}

impl PartialEq for Flow {
    fn eq(&self, other: &Self) -> bool {
        self.tools == other.tools
    }
}

impl Eq for Flow {}

impl Hash for Flow {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.tools.hash(state)
    }
}

impl Ord for Flow {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_bytes().cmp(other.canonical_bytes())
    }
}

impl PartialOrd for Flow {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tools.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Flow({self})")
    }
}

impl FromStr for Flow {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Flow::parse(s)
    }
}

impl Serialize for Flow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Flow {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Flow::parse(&text).map_err(serde::de::Error::custom)
    }
}
