use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "nflow",
    version,
    about = "Mine common tool workflows from usage logs and recommend new ones"
)]
pub struct Cli {
    /// Optional TOML file with [ingest], [generate], [mine] and [recommend] tables.
    /// Flags given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic event log with planted workflows.
    Generate(GenerateArgs),
    /// Summarise an event log.
    Stats(StatsArgs),
    /// Mine the top n-flows and write the flow table.
    Mine(MineArgs),
    /// Recommend flows to one user or to everyone.
    Recommend(RecommendArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Count,
    Tks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Tsv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Popular,
    Cf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Event log (CSV or JSON-lines).
    #[arg(long)]
    pub input: PathBuf,
    /// Log format; defaults to jsonl for .jsonl/.ndjson files, csv otherwise.
    #[arg(long, value_enum)]
    pub input_format: Option<LogFormat>,
    /// Idle time in milliseconds that ends a session.
    #[arg(long)]
    pub session_gap_ms: Option<u64>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub users: Option<usize>,
    /// Sessions per user, `N` or `MIN:MAX`.
    #[arg(long)]
    pub sessions_per_user: Option<String>,
    /// Events per session, `N` or `MIN:MAX`.
    #[arg(long)]
    pub session_length: Option<String>,
    /// Number of distinct background tools.
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Planted flow and injection rate, e.g. `Copy/Paste:0.2`. Repeatable.
    #[arg(long)]
    pub planted: Vec<String>,
    /// Probability that a background event is immediately repeated.
    #[arg(long)]
    pub repeat_noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub session_gap_ms: Option<u64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Flow lengths, `N` or `MIN:MAX`.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Events that may be skipped between consecutive tools (tks engine only).
    #[arg(long)]
    pub max_gap: Option<usize>,
    /// Subsumption threshold in (0, 1].
    #[arg(long)]
    pub theta: Option<f64>,
    /// Keep flows that a longer frequent flow contains.
    #[arg(long)]
    pub no_subsume: bool,
    /// Worker threads for the count engine.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Flow-table output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).args(["user", "all"]))]
pub struct RecommendArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Flow table written by `mine`.
    #[arg(long)]
    pub flows: PathBuf,
    #[arg(long)]
    pub user: Option<String>,
    /// Recommend for every user in the log.
    #[arg(long)]
    pub all: bool,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Neighbourhood size for collaborative filtering.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Occurrences at which a user counts as already using a flow.
    #[arg(long)]
    pub usage_threshold: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
