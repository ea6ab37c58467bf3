//! Optional TOML configuration file. Every key mirrors a command-line flag.

use std::path::Path;

use serde::Deserialize;

use crate::args::{Engine, LogFormat, MethodArg, OutputFormat};
use crate::exit::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub mine: MineSection,
    #[serde(default)]
    pub recommend: RecommendSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSection {
    pub input_format: Option<LogFormat>,
    pub session_gap_ms: Option<u64>,
    pub strict: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub users: Option<usize>,
    pub sessions_per_user: Option<String>,
    pub session_length: Option<String>,
    pub vocab: Option<usize>,
    pub planted: Option<Vec<String>>,
    pub repeat_noise: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MineSection {
    pub n: Option<String>,
    pub top_k: Option<usize>,
    pub engine: Option<Engine>,
    pub max_gap: Option<usize>,
    pub theta: Option<f64>,
    pub no_subsume: Option<bool>,
    pub threads: Option<usize>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendSection {
    pub method: Option<MethodArg>,
    pub count: Option<usize>,
    pub neighbors: Option<usize>,
    pub usage_threshold: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<OutputFormat>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Parses `N` or `MIN:MAX` into an inclusive range.
pub fn parse_range(flag: &str, text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::usage(format!("--{flag} expects N or MIN:MAX, got {text:?}"));
    let (lo, hi) = match text.split_once(':') {
        Some((lo, hi)) => (
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = text.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}
