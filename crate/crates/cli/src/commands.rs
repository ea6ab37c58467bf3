use std::io::Write;
use std::path::Path;

use nflow_core::corpus::{default_planted, generate_corpus, write_csv, CorpusSpec};
use nflow_core::ingest::DEFAULT_SESSION_GAP_MS;
use nflow_core::{
    build_profiles, compress_all, count_nflows_parallel, filter_subsumed, mine_tks, parse_events,
    read_flow_table, recommend, segment_sessions, top_k, write_flow_table, Flow, IngestConfig,
    IngestError, IngestReport, InputFormat, Method, MiningConfig, RankedFlows, RecommendConfig,
    RecommendError, Recommendation, Session, TableFormat, ToolEvent,
};
use serde_json::json;

use crate::args::{
    Engine, GenerateArgs, IngestArgs, LogFormat, MethodArg, MineArgs, OutputFormat, RecommendArgs,
    StatsArgs,
};
use crate::config::{parse_range, FileConfig, IngestSection};
use crate::exit::{self, CmdResult, Failure};
use crate::manifest::RunManifest;

fn read_file(path: &Path) -> CmdResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::input(format!("cannot write to stdout: {e}"))),
    }
}

fn ingest_config(args: &IngestArgs, file: &IngestSection) -> IngestConfig {
    let by_extension = match args.input.extension().and_then(|e| e.to_str()) {
        Some("jsonl" | "ndjson") => LogFormat::Jsonl,
        _ => LogFormat::Csv,
    };
    let format = args
        .input_format
        .or(file.input_format)
        .unwrap_or(by_extension);
    IngestConfig {
        session_gap_ms: args
            .session_gap_ms
            .or(file.session_gap_ms)
            .unwrap_or(DEFAULT_SESSION_GAP_MS),
        strict_mode: args.strict || file.strict.unwrap_or(false),
        format: match format {
            LogFormat::Csv => InputFormat::Csv,
            LogFormat::Jsonl => InputFormat::JsonLines,
        },
    }
}

struct Loaded {
    bytes: Vec<u8>,
    events: Vec<ToolEvent>,
    report: IngestReport,
}

fn load_events(path: &Path, config: &IngestConfig) -> CmdResult<Loaded> {
    let bytes = read_file(path)?;
    let (events, report) = parse_events(&bytes[..], config).map_err(|e| match e {
        IngestError::Io(_) => Failure::new(exit::INPUT, e),
        IngestError::InvalidConfig(_) => Failure::new(exit::USAGE, e),
        IngestError::MalformedHeader(_) | IngestError::Line { .. } => Failure::new(
            exit::PARSE,
            anyhow::Error::new(e).context(format!("parsing {}", path.display())),
        ),
    })?;
    if report.lines_rejected > 0 {
        eprintln!(
            "warning: skipped {} malformed line(s) in {}",
            report.lines_rejected,
            path.display()
        );
        for (line, reason) in &report.rejection_samples {
            eprintln!("  line {line}: {reason}");
        }
    }
    Ok(Loaded {
        bytes,
        events,
        report,
    })
}

fn sessions_of(events: Vec<ToolEvent>, config: &IngestConfig) -> Vec<Session> {
    compress_all(segment_sessions(events, config))
}

pub fn generate(args: GenerateArgs, file: &FileConfig) -> CmdResult {
    let g = &file.generate;
    let sessions_per_user = match args
        .sessions_per_user
        .as_ref()
        .or(g.sessions_per_user.as_ref())
    {
        Some(text) => parse_range("sessions-per-user", text)?,
        None => (1, 3),
    };
    let session_length = match args.session_length.as_ref().or(g.session_length.as_ref()) {
        Some(text) => parse_range("session-length", text)?,
        None => (20, 60),
    };
    let planted_specs = if args.planted.is_empty() {
        g.planted.clone().unwrap_or_default()
    } else {
        args.planted
    };
    let planted = if planted_specs.is_empty() {
        default_planted()
    } else {
        planted_specs
            .iter()
            .map(|spec| {
                let (flow, rate) = spec.rsplit_once(':').ok_or_else(|| {
                    Failure::usage(format!("--planted expects FLOW:RATE, got {spec:?}"))
                })?;
                let flow = Flow::parse(flow)
                    .map_err(|e| Failure::usage(format!("--planted {spec:?}: {e}")))?;
                let rate: f64 = rate
                    .parse()
                    .map_err(|_| Failure::usage(format!("--planted {spec:?}: bad rate")))?;
                Ok((flow, rate))
            })
            .collect::<CmdResult<Vec<_>>>()?
    };
    let spec = CorpusSpec {
        users: args.users.or(g.users).unwrap_or(100),
        sessions_per_user: sessions_per_user.0..=sessions_per_user.1,
        session_length: session_length.0..=session_length.1,
        background_vocab: args.vocab.or(g.vocab).unwrap_or(50),
        planted,
        repeat_noise_rate: args.repeat_noise.or(g.repeat_noise).unwrap_or(0.0),
        seed: args.seed.or(g.seed).unwrap_or(0),
        session_gap_ms: args
            .session_gap_ms
            .or(file.ingest.session_gap_ms)
            .unwrap_or(DEFAULT_SESSION_GAP_MS),
    };
    let mut manifest = RunManifest::new("generate", json!({ "corpus": &spec }));
    let events = manifest
        .time("generate", || generate_corpus(&spec))
        .map_err(|e| Failure::new(exit::USAGE, e))?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &events).map_err(|e| Failure::new(exit::INPUT, e))?;
    write_output(args.out.as_deref(), &buf)?;
    if let Some(out) = &args.out {
        manifest.write(out, &buf)?;
    }
    Ok(())
}

pub fn stats(args: StatsArgs, file: &FileConfig) -> CmdResult {
    let config = ingest_config(&args.ingest, &file.ingest);
    let loaded = load_events(&args.ingest.input, &config)?;
    let users: std::collections::HashSet<&str> =
        loaded.events.iter().map(|e| e.user_id.as_str()).collect();
    let tools: std::collections::HashSet<&str> =
        loaded.events.iter().map(|e| e.tool_id.as_str()).collect();
    let (users, tools) = (users.len(), tools.len());
    let total = loaded.events.len();
    let sessions = segment_sessions(loaded.events, &config);
    let session_count = sessions.len();
    let kept: usize = compress_all(sessions).iter().map(Session::len).sum();

    let rows = [
        ("events", total),
        ("lines_rejected", loaded.report.lines_rejected as usize),
        ("users", users),
        ("tools", tools),
        ("sessions", session_count),
        ("removed_by_compression", total - kept),
    ];
    let text = match args
        .format
        .or(file.mine.format)
        .unwrap_or(OutputFormat::Tsv)
    {
        OutputFormat::Tsv => rows
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect::<String>(),
        OutputFormat::Jsonl => {
            let obj: serde_json::Map<String, serde_json::Value> = rows
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect();
            format!("{}\n", serde_json::Value::Object(obj))
        }
    };
    write_output(None, text.as_bytes())
}

/// Mines one ranked list per length with the chosen engine.
pub fn mine_ranked(
    sessions: &[Session],
    config: &MiningConfig,
    engine: Engine,
    threads: usize,
) -> CmdResult<Vec<RankedFlows>> {
    match engine {
        Engine::Tks => mine_tks(sessions, config).map_err(|e| Failure::new(exit::USAGE, e)),
        Engine::Count => (config.n_min..=config.n_max)
            .map(|n| {
                let table = count_nflows_parallel(sessions, n, threads)
                    .map_err(|e| Failure::new(exit::USAGE, e))?;
                Ok(top_k(&table, config.k))
            })
            .collect(),
    }
}

pub fn mine(args: MineArgs, file: &FileConfig) -> CmdResult {
    let m = &file.mine;
    let ingest = ingest_config(&args.ingest, &file.ingest);
    let (n_min, n_max) = match args.n.as_ref().or(m.n.as_ref()) {
        Some(text) => parse_range("n", text)?,
        None => (2, 4),
    };
    let defaults = MiningConfig::default();
    let config = MiningConfig {
        n_min,
        n_max,
        k: args.top_k.or(m.top_k).unwrap_or(defaults.k),
        max_gap: args.max_gap.or(m.max_gap).unwrap_or(defaults.max_gap),
        theta: args.theta.or(m.theta).unwrap_or(defaults.theta),
    };
    config
        .validate()
        .map_err(|e| Failure::new(exit::USAGE, e))?;
    let engine = args.engine.or(m.engine).unwrap_or(Engine::Count);
    if engine == Engine::Count && config.max_gap > 0 {
        return Err(Failure::usage("--max-gap > 0 requires --engine tks"));
    }
    let subsume = !(args.no_subsume || m.no_subsume.unwrap_or(false));
    let threads = args.threads.or(m.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let format = args.format.or(m.format).unwrap_or(OutputFormat::Tsv);

    let mut manifest = RunManifest::new(
        "mine",
        json!({
            "ingest": &ingest,
            "mining": &config,
            "engine": engine,
            "subsume": subsume,
            "threads": threads,
            "format": format,
        }),
    );
    let loaded = manifest.time("parse", || load_events(&args.ingest.input, &ingest))?;
    manifest.input(&args.ingest.input, &loaded.bytes);
    let sessions = manifest.time("segment", || sessions_of(loaded.events, &ingest));
    let ranked = manifest.time("mine", || mine_ranked(&sessions, &config, engine, threads))?;
    let ranked = if subsume {
        manifest
            .time("subsume", || filter_subsumed(&ranked, config.theta))
            .map_err(|e| Failure::new(exit::USAGE, e))?
    } else {
        ranked
    };

    let mut buf = Vec::new();
    let table_format = match format {
        OutputFormat::Tsv => TableFormat::Tsv,
        OutputFormat::Jsonl => TableFormat::Jsonl,
    };
    write_flow_table(&mut buf, &ranked, table_format).map_err(|e| Failure::new(exit::INPUT, e))?;
    write_output(Some(&args.out), &buf)?;
    manifest.write(&args.out, &buf)
}

fn run_recommendations(
    profiles: &[nflow_core::UserProfile],
    stats: &[nflow_core::FlowStats],
    users: &[&str],
    config: &RecommendConfig,
    threads: usize,
) -> Result<Vec<Vec<Recommendation>>, RecommendError> {
    let one = |user: &&str| recommend(profiles, stats, user, config);
    if threads <= 1 || users.len() < 2 {
        return users.iter().map(one).collect();
    }
    let chunk = users.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = users
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(one).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut out = Vec::with_capacity(users.len());
        for h in handles {
            out.extend(h.join().expect("recommendation worker panicked")?);
        }
        Ok(out)
    })
}

pub fn recommend_cmd(args: RecommendArgs, file: &FileConfig) -> CmdResult {
    let r = &file.recommend;
    let ingest = ingest_config(&args.ingest, &file.ingest);
    let defaults = RecommendConfig::default();
    let mut config = RecommendConfig {
        count: args.count.or(r.count).unwrap_or(defaults.count),
        method: match args.method.or(r.method) {
            Some(MethodArg::Cf) => Method::Cf,
            Some(MethodArg::Popular) | None => Method::Popular,
        },
        neighbors_m: args
            .neighbors
            .or(r.neighbors)
            .unwrap_or(defaults.neighbors_m),
        usage_threshold: args
            .usage_threshold
            .or(r.usage_threshold)
            .unwrap_or(defaults.usage_threshold),
    };
    config
        .validate()
        .map_err(|e| Failure::new(exit::USAGE, e))?;
    let threads = args.threads.or(r.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    let format = args.format.or(r.format).unwrap_or(OutputFormat::Tsv);

    let mut manifest = RunManifest::new("recommend", serde_json::Value::Null);
    let table_bytes = read_file(&args.flows)?;
    manifest.input(&args.flows, &table_bytes);
    let ranked = read_flow_table(&table_bytes[..]).map_err(|e| {
        Failure::new(
            exit::INPUT,
            anyhow::Error::new(e).context(format!("reading {}", args.flows.display())),
        )
    })?;
    let stats: Vec<_> = ranked.into_iter().flat_map(|r| r.entries).collect();
    let vocabulary: Vec<Flow> = stats.iter().map(|s| s.flow.clone()).collect();

    let loaded = manifest.time("parse", || load_events(&args.ingest.input, &ingest))?;
    manifest.input(&args.ingest.input, &loaded.bytes);
    let sessions = manifest.time("segment", || sessions_of(loaded.events, &ingest));
    let profiles = if vocabulary.is_empty() {
        // No flows to count; every user still gets an (empty) profile.
        let mut users: Vec<&str> = sessions.iter().map(|s| s.user_id.as_str()).collect();
        users.dedup();
        users
            .into_iter()
            .map(|u| nflow_core::UserProfile {
                user_id: u.to_string(),
                flow_counts: Default::default(),
                total_events: 0,
            })
            .collect()
    } else {
        manifest
            .time("profiles", || build_profiles(&sessions, &vocabulary))
            .map_err(|e| Failure::new(exit::INPUT, e))?
    };

    let users: Vec<&str> = match &args.user {
        Some(user) => {
            if !profiles.iter().any(|p| &p.user_id == user) {
                return Err(Failure::new(
                    exit::UNKNOWN_USER,
                    RecommendError::UnknownUser(user.clone()),
                ));
            }
            vec![user.as_str()]
        }
        None => profiles.iter().map(|p| p.user_id.as_str()).collect(),
    };
    if config.method == Method::Cf {
        if profiles.len() < 2 {
            return Err(Failure::input(
                "collaborative filtering needs at least two users in the log",
            ));
        }
        config.neighbors_m = config.neighbors_m.min(profiles.len() - 1);
    }
    manifest.config = json!({
        "ingest": &ingest,
        "recommend": &config,
        "user": &args.user,
        "all": args.all,
        "threads": threads,
        "format": format,
    });

    let results = manifest
        .time("recommend", || {
            run_recommendations(&profiles, &stats, &users, &config, threads)
        })
        .map_err(|e| match e {
            RecommendError::UnknownUser(_) => Failure::new(exit::UNKNOWN_USER, e),
            other => Failure::new(exit::INPUT, other),
        })?;

    let mut buf = String::new();
    if format == OutputFormat::Tsv {
        buf.push_str(if args.all {
            "user_id\trank\tflow\tscore\tmethod\n"
        } else {
            "rank\tflow\tscore\tmethod\n"
        });
    }
    for (user, recs) in users.iter().zip(&results) {
        for rec in recs {
            match format {
                OutputFormat::Tsv => {
                    if args.all {
                        buf.push_str(user);
                        buf.push('\t');
                    }
                    buf.push_str(&format!(
                        "{}\t{}\t{}\t{}\n",
                        rec.rank, rec.flow, rec.score, rec.method
                    ));
                }
                OutputFormat::Jsonl => {
                    let mut row = json!({
                        "rank": rec.rank,
                        "flow": rec.flow.to_string(),
                        "score": rec.score,
                        "method": rec.method.to_string(),
                    });
                    if args.all {
                        row["user_id"] = json!(user);
                    }
                    buf.push_str(&row.to_string());
                    buf.push('\n');
                }
            }
        }
    }
    write_output(args.out.as_deref(), buf.as_bytes())?;
    if let Some(out) = &args.out {
        manifest.write(out, buf.as_bytes())?;
    }
    Ok(())
}
