//! Synthetic event logs with planted workflows, and exhaustive reference
//! counting to check the miners against.

mod generate;
mod oracle;

pub use generate::{default_planted, generate_corpus, write_csv, CorpusError, CorpusSpec};
pub use oracle::oracle_topk;
