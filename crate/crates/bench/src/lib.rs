//! Shared fixtures for the benchmarks.

use nflow_core::corpus::write_csv;
use nflow_core::{
    compress_all, generate_corpus, segment_sessions, CorpusSpec, IngestConfig, Session,
};

/// A generated corpus of roughly `users * 2 * 40` events over a `vocab`-tool background.
pub fn corpus_spec(users: usize, vocab: usize, seed: u64) -> CorpusSpec {
    CorpusSpec {
        users,
        background_vocab: vocab,
        sessions_per_user: 1..=3,
        session_length: 20..=60,
        seed,
        ..CorpusSpec::default()
    }
}

pub fn sessions(spec: &CorpusSpec) -> Vec<Session> {
    let events = generate_corpus(spec).expect("valid corpus spec");
    compress_all(segment_sessions(events, &IngestConfig::default()))
}

pub fn csv_bytes(spec: &CorpusSpec) -> Vec<u8> {
    let events = generate_corpus(spec).expect("valid corpus spec");
    let mut buf = Vec::new();
    write_csv(&mut buf, &events).expect("writing to memory");
    buf
}
