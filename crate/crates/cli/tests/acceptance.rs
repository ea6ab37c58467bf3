//! End-to-end acceptance checks. Each test prints exactly one PASS/FAIL line
//! to stderr (bypassing the harness capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use nflow_core::corpus::write_csv;
use nflow_core::{
    build_profiles, compress_all, count_nflows, filter_subsumed, generate_corpus, mine_tks,
    oracle_topk, read_flow_table, segment_sessions, top_k, CorpusSpec, Flow, FlowStats,
    IngestConfig, MiningConfig, RankedFlows, Session, ToolEvent,
};

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[acceptance {id}] {verdict} {title}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn nflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nflow"))
}

fn run(args: &[&str]) -> Output {
    nflow().args(args).output().expect("spawn nflow")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "nflow {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn sessions(events: Vec<ToolEvent>, compress: bool) -> Vec<Session> {
    let segmented = segment_sessions(events, &IngestConfig::default());
    if compress {
        compress_all(segmented)
    } else {
        segmented
    }
}

fn flow(text: &str) -> Flow {
    Flow::parse(text).unwrap()
}

/// Small corpora with a narrow vocabulary so ties and shared flows are common.
fn small_spec(seed: u64) -> CorpusSpec {
    let s = seed as usize;
    CorpusSpec {
        users: 1 + s % 20,
        sessions_per_user: 1..=1 + s % 2,
        session_length: 2..=4 + s % 8,
        background_vocab: 2 + s % 6,
        planted: vec![(flow("Copy/Paste"), 0.1), (flow("Open/Edit/Save"), 0.05)],
        repeat_noise_rate: [0.0, 0.2, 0.5][s % 3],
        seed,
        ..CorpusSpec::default()
    }
}

fn assert_same(expected: &RankedFlows, actual: &RankedFlows, what: &str) -> Result<(), String> {
    if expected == actual {
        Ok(())
    } else {
        Err(format!(
            "{what} differs for n={}: expected {:?}, got {:?}",
            expected.n, expected.entries, actual.entries
        ))
    }
}

#[test]
fn c1_oracle_equivalence_contiguous() {
    let start = Instant::now();
    let corpora = 120;
    let mut failure = None;
    'outer: for seed in 0..corpora {
        let mut events = generate_corpus(&small_spec(seed)).unwrap();
        events.truncate(200);
        let sessions = sessions(events, seed % 2 == 0);
        let config = MiningConfig {
            n_min: 1,
            n_max: 4,
            k: 10,
            max_gap: 0,
            theta: 0.75,
        };
        let mined = mine_tks(&sessions, &config).unwrap();
        for n in 1..=4 {
            let oracle = oracle_topk(&sessions, n, 10, 0);
            let counted = top_k(&count_nflows(&sessions, n).unwrap(), 10);
            let checks = [
                assert_same(&oracle, &mined[n - 1], &format!("mine_tks seed {seed}")),
                assert_same(&oracle, &counted, &format!("count_nflows seed {seed}")),
            ];
            if let Some(Err(e)) = checks.into_iter().find(Result::is_err) {
                failure = Some(e);
                break 'outer;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failure.is_none() && elapsed < Duration::from_secs(60);
    let detail = failure
        .clone()
        .unwrap_or_else(|| format!("{corpora} corpora, n=1..4, k=10 in {elapsed:.2?}"));
    report(1, "oracle equivalence, contiguous", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn c2_oracle_equivalence_gapped() {
    let start = Instant::now();
    let corpora = 60;
    let mut failure = None;
    let mut max_sessions = 0;
    let mut max_len = 0;
    'outer: for seed in 0..corpora {
        let s = seed as usize;
        let spec = CorpusSpec {
            users: 1 + s % 5,
            sessions_per_user: 1..=2,
            session_length: 3..=5 + s % 20,
            background_vocab: 2 + s % 5,
            planted: vec![
                (flow("Copy/Paste"), 0.15),
                (flow("Find/Replace/Save"), 0.05),
            ],
            repeat_noise_rate: [0.0, 0.3][s % 2],
            seed: 1000 + seed,
            ..CorpusSpec::default()
        };
        let sessions = sessions(generate_corpus(&spec).unwrap(), seed % 3 != 0);
        max_sessions = max_sessions.max(sessions.len());
        max_len = max_len.max(sessions.iter().map(Session::len).max().unwrap_or(0));
        for gap in 1..=2 {
            let config = MiningConfig {
                n_min: 1,
                n_max: 4,
                k: 10,
                max_gap: gap,
                theta: 0.75,
            };
            let mined = mine_tks(&sessions, &config).unwrap();
            for n in 1..=4 {
                let oracle = oracle_topk(&sessions, n, 10, gap);
                if let Err(e) =
                    assert_same(&oracle, &mined[n - 1], &format!("seed {seed} gap {gap}"))
                {
                    failure = Some(e);
                    break 'outer;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let shape_ok = max_sessions <= 10 && max_len <= 30;
    let pass = failure.is_none() && shape_ok && elapsed < Duration::from_secs(60);
    let detail = failure.clone().unwrap_or_else(|| {
        format!(
            "{corpora} corpora (<= {max_sessions} sessions, length <= {max_len}), max_gap 1 and 2, n=1..4 in {elapsed:.2?}"
        )
    });
    report(2, "oracle equivalence, gapped", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn c3_repeat_pruning() {
    // Duplicate-once noise alone yields only constant 2-flows, so the corpus
    // also carries repeat runs of the kind seen in real logs.
    let mut problems = Vec::new();
    for seed in 0..20 {
        let spec = CorpusSpec {
            users: 100,
            background_vocab: 50,
            planted: vec![
                (flow("Copy/Paste"), 0.05),
                (flow("Delete/Delete/Delete"), 0.04),
                (flow("Save/Save/Save/Save"), 0.03),
            ],
            repeat_noise_rate: 0.5,
            seed: 300 + seed,
            ..CorpusSpec::default()
        };
        let events = generate_corpus(&spec).unwrap();
        let raw = sessions(events.clone(), false);
        let compressed = sessions(events, true);
        for n in 2..=4 {
            let top5 = top_k(&count_nflows(&raw, n).unwrap(), 5);
            if !top5.flows().any(Flow::is_constant) {
                problems.push(format!(
                    "seed {seed} n={n}: no constant flow in uncompressed top-5"
                ));
            }
            let all = count_nflows(&compressed, n).unwrap();
            let constant = all
                .iter()
                .find(|(f, _, _)| f.is_constant())
                .map(|(f, _, _)| f.to_string());
            if let Some(f) = constant {
                problems.push(format!(
                    "seed {seed} n={n}: constant flow {f} after compression"
                ));
            }
        }
    }
    let pass = problems.is_empty();
    let detail = if pass {
        "20 seeds, noise 0.5: constant flow in every uncompressed top-5 (n=2..4), none after compression".to_string()
    } else {
        problems.join("; ")
    };
    report(3, "repeat pruning", pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn c4_planted_recovery() {
    let planted = flow("Open/Refactor/Commit");
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..20 {
        let spec = CorpusSpec {
            users: 500,
            background_vocab: 200,
            planted: vec![(planted.clone(), 0.05)],
            seed: 4000 + seed,
            ..CorpusSpec::default()
        };
        let sessions = sessions(generate_corpus(&spec).unwrap(), true);
        let config = MiningConfig {
            n_min: 3,
            n_max: 3,
            k: 10,
            ..MiningConfig::default()
        };
        let top = &mine_tks(&sessions, &config).unwrap()[0];
        if top.entries.first().map(|e| &e.flow) == Some(&planted) {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    let pass = hits >= 19;
    report(
        4,
        "planted-flow recovery",
        pass,
        &format!("planted 3-flow ranked #1 in {hits}/20 seeds (misses: {misses:?})"),
    );
    assert!(pass);
}

#[test]
fn c5_subsumption_chain() {
    let stat = |text: &str, occ: u64| FlowStats {
        flow: flow(text),
        occurrences: occ,
        distinct_users: 10,
        user_coverage: 1.0,
    };
    let ranked = vec![
        RankedFlows::new(2, vec![stat("Copy/Paste", 100)]),
        RankedFlows::new(3, vec![stat("Paste/Copy/Paste", 95)]),
        RankedFlows::new(4, vec![stat("Copy/Paste/Copy/Paste", 90)]),
    ];
    let kept: Vec<String> = filter_subsumed(&ranked, 0.75)
        .unwrap()
        .iter()
        .flat_map(|r| r.flows().map(Flow::to_string))
        .collect();
    let pass = kept == ["Copy/Paste/Copy/Paste"];
    report(
        5,
        "subsumption chain",
        pass,
        &format!("theta 0.75 on 100/95/90 keeps {kept:?}"),
    );
    assert!(pass);
}

/// Parses `recommend --all` TSV into per-user `(rank, flow, score)` rows.
fn parse_recommendations(tsv: &str) -> BTreeMap<String, Vec<(usize, String, f64)>> {
    let mut lines = tsv.lines();
    assert_eq!(lines.next(), Some("user_id\trank\tflow\tscore\tmethod"));
    let mut out: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 5, "bad row {line:?}");
        out.entry(f[0].to_string()).or_default().push((
            f[1].parse().unwrap(),
            f[2].to_string(),
            f[3].parse().unwrap(),
        ));
    }
    out
}

#[test]
fn c6_recommendation_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut rows = 0usize;
    for seed in 0..100u64 {
        let s = seed as usize;
        let spec = CorpusSpec {
            users: 3 + s % 28,
            sessions_per_user: 1..=2,
            session_length: 5..=20,
            background_vocab: 4 + s % 10,
            repeat_noise_rate: 0.2,
            seed: 6000 + seed,
            ..CorpusSpec::default()
        };
        let events = generate_corpus(&spec).unwrap();
        let log = dir.path().join(format!("log{seed}.csv"));
        let mut bytes = Vec::new();
        write_csv(&mut bytes, &events).unwrap();
        std::fs::write(&log, &bytes).unwrap();
        let flows = dir.path().join(format!("flows{seed}.tsv"));
        run_ok(&[
            "mine",
            "--input",
            path_str(&log),
            "--n",
            "2:3",
            "--top-k",
            "15",
            "--out",
            path_str(&flows),
        ]);

        let table = read_flow_table(&std::fs::read(&flows).unwrap()[..]).unwrap();
        let vocabulary: Vec<Flow> = table.iter().flat_map(|r| r.flows().cloned()).collect();
        let profiles = build_profiles(&sessions(events, true), &vocabulary).unwrap();

        for method in ["popular", "cf"] {
            let invoke = |threads: &str| {
                let out = run_ok(&[
                    "recommend",
                    "--input",
                    path_str(&log),
                    "--flows",
                    path_str(&flows),
                    "--all",
                    "--method",
                    method,
                    "--threads",
                    threads,
                ]);
                String::from_utf8(out.stdout).unwrap()
            };
            let first = invoke("1");
            if invoke("1") != first {
                problems.push(format!("seed {seed} {method}: repeated runs differ"));
            }
            if invoke("4") != first {
                problems.push(format!(
                    "seed {seed} {method}: --threads 4 differs from --threads 1"
                ));
            }
            for (user, recs) in parse_recommendations(&first) {
                rows += recs.len();
                let profile = profiles.iter().find(|p| p.user_id == user).unwrap();
                for (i, (rank, text, score)) in recs.iter().enumerate() {
                    if *rank != i + 1 {
                        problems.push(format!(
                            "seed {seed} {method} {user}: rank {rank} at position {}",
                            i + 1
                        ));
                    }
                    if profile.count(&flow(text)) >= 1 {
                        problems.push(format!(
                            "seed {seed} {method} {user}: recommended used flow {text}"
                        ));
                    }
                    if i > 0 && *score > recs[i - 1].2 {
                        problems.push(format!(
                            "seed {seed} {method} {user}: score increases at rank {rank}"
                        ));
                    }
                }
            }
        }
    }
    let pass = problems.is_empty() && rows > 0;
    let detail = if pass {
        format!("100 corpora, popular and cf, {rows} rows: no used flows, scores non-increasing, deterministic across runs and threads")
    } else {
        problems
            .iter()
            .take(5)
            .cloned()
            .collect::<Vec<_>>()
            .join("; ")
    };
    report(6, "recommendation invariants", pass, &detail);
    assert!(pass, "{detail}");
}

fn children_peak_rss_bytes() -> u64 {
    // SAFETY: getrusage only writes into the zeroed struct we pass.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, &mut usage) };
    assert_eq!(rc, 0, "getrusage failed");
    // ru_maxrss is reported in kilobytes on Linux.
    usage.ru_maxrss as u64 * 1024
}

#[test]
fn c7_scale_budget() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        users: 1000,
        background_vocab: 300,
        sessions_per_user: 5..=15,
        session_length: 50..=150,
        seed: 7,
        ..CorpusSpec::default()
    };
    let mut events = generate_corpus(&spec).unwrap();
    assert!(
        events.len() >= 1_000_000,
        "corpus too small: {}",
        events.len()
    );
    events.truncate(1_000_000);
    let log: PathBuf = dir.path().join("big.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&log).unwrap());
    write_csv(&mut file, &events).unwrap();
    drop(file);
    drop(events);

    let mine = |engine: &str, threads: &str, out: &Path| {
        let start = Instant::now();
        run_ok(&[
            "mine",
            "--input",
            path_str(&log),
            "--n",
            "2:4",
            "--top-k",
            "100",
            "--engine",
            engine,
            "--threads",
            threads,
            "--out",
            path_str(out),
        ]);
        start.elapsed()
    };
    let single = dir.path().join("t1.tsv");
    let count_time = mine("count", "1", &single);
    let tks_out = dir.path().join("tks.tsv");
    let tks_time = mine("tks", "1", &tks_out);
    let peak = children_peak_rss_bytes();
    let multi = dir.path().join("t4.tsv");
    mine("count", "4", &multi);

    let single_bytes = std::fs::read(&single).unwrap();
    let identical = single_bytes == std::fs::read(&multi).unwrap();
    let engines_agree = single_bytes == std::fs::read(&tks_out).unwrap();
    let budget = Duration::from_secs(60);
    let pass =
        count_time <= budget && tks_time <= budget && peak <= 2 << 30 && identical && engines_agree;
    let detail = format!(
        "1,000,000 events, n=2..4, k=100: count {count_time:.2?}, tks {tks_time:.2?}, peak RSS {} MiB, \
         --threads 4 identical: {identical}, engines identical: {engines_agree}",
        peak >> 20
    );
    report(7, "scale budget", pass, &detail);
    assert!(pass, "{detail}");
}

fn expected_table(events: Vec<ToolEvent>) -> Vec<RankedFlows> {
    let sessions = sessions(events, true);
    let ranked: Vec<RankedFlows> = (2..=4)
        .map(|n| top_k(&count_nflows(&sessions, n).unwrap(), 25))
        .collect();
    filter_subsumed(&ranked, 0.75).unwrap()
}

fn same_table(expected: &[RankedFlows], actual: &[RankedFlows]) -> bool {
    expected.len() == actual.len()
        && expected.iter().zip(actual).all(|(e, a)| {
            e.n == a.n
                && e.entries.len() == a.entries.len()
                && e.entries.iter().zip(&a.entries).all(|(x, y)| {
                    x.flow == y.flow
                        && x.occurrences == y.occurrences
                        && x.distinct_users == y.distinct_users
                        && (x.user_coverage - y.user_coverage).abs() <= 5e-7
                })
        })
}

#[test]
fn c8_flow_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut flows_checked = 0;
    let corpora = 30u64;
    for seed in 0..corpora {
        let spec = CorpusSpec {
            users: 2 + seed as usize * 3,
            background_vocab: 5 + seed as usize,
            repeat_noise_rate: 0.3,
            seed: 8000 + seed,
            ..CorpusSpec::default()
        };
        let events = generate_corpus(&spec).unwrap();
        let log = dir.path().join(format!("log{seed}.csv"));
        let mut bytes = Vec::new();
        write_csv(&mut bytes, &events).unwrap();
        std::fs::write(&log, &bytes).unwrap();
        let expected = expected_table(events);

        for format in ["tsv", "jsonl"] {
            let out = dir.path().join(format!("flows{seed}.{format}"));
            run_ok(&[
                "mine",
                "--input",
                path_str(&log),
                "--n",
                "2:4",
                "--top-k",
                "25",
                "--format",
                format,
                "--out",
                path_str(&out),
            ]);
            let actual = read_flow_table(&std::fs::read(&out).unwrap()[..]).unwrap();
            if !same_table(&expected, &actual) {
                problems.push(format!("seed {seed} {format}: re-read table differs"));
            }
            flows_checked += actual.iter().map(RankedFlows::len).sum::<usize>();
            let user = "u0000";
            let rec = run(&[
                "recommend",
                "--input",
                path_str(&log),
                "--flows",
                path_str(&out),
                "--user",
                user,
            ]);
            if !rec.status.success() {
                problems.push(format!(
                    "seed {seed} {format}: recommend rejected the table"
                ));
            }
        }
    }
    let pass = problems.is_empty();
    let detail = if pass {
        format!(
            "{corpora} corpora, tsv and jsonl: {flows_checked} flows re-read with identical counts"
        )
    } else {
        problems.join("; ")
    };
    report(8, "flow-table round trip", pass, &detail);
    assert!(pass, "{detail}");
}
