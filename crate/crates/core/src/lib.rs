//! Mining common n-tool workflows ("n-flows") from time-stamped tool-usage
//! logs and recommending workflows a user has not adopted yet.
//!
//! The pipeline is: [`parse_events`] → [`segment_sessions`] →
//! [`compress_repeats`] → [`count_nflows`]/[`mine_tks`] → [`filter_subsumed`]
//! → [`build_profiles`] → [`recommend_popular`] or [`recommend_cf`].

pub mod corpus;
pub mod flow;
pub mod ingest;
pub mod mining;
pub mod recommend;

pub use corpus::{generate_corpus, oracle_topk, CorpusSpec};
pub use flow::{Flow, FlowError};
pub use ingest::{
    compress_all, compress_repeats, parse_events, segment_sessions, IngestConfig, IngestError,
    IngestReport, InputFormat, Session, ToolEvent,
};
pub use mining::{
    compute_stats, count_nflows, count_nflows_parallel, filter_subsumed, merge_tables, mine_tks,
    read_flow_table, top_k, write_flow_table, FlowStats, FlowTable, MiningConfig, MiningError,
    RankedFlows, TableFormat,
};
pub use recommend::{
    build_profiles, cosine_similarity, recommend, recommend_cf, recommend_popular, Method,
    RecommendConfig, RecommendError, Recommendation, UserProfile,
};
