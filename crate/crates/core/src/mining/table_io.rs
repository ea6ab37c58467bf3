//! The flow-table file handed from mining to recommendation.
//!
//! TSV with header `n\tflow\toccurrences\tdistinct_users\tuser_coverage`,
//! rows ordered by length then rank, coverage with six decimals. A JSON-lines
//! variant carries the same fields per line.

use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FlowStats, RankedFlows};
use crate::flow::Flow;

pub const FLOW_TABLE_HEADER: &str = "n\tflow\toccurrences\tdistinct_users\tuser_coverage";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Tsv,
    Jsonl,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(TableFormat::Tsv),
            "jsonl" => Ok(TableFormat::Jsonl),
            other => Err(format!(
                "unknown output format {other:?} (expected tsv or jsonl)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum TableIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("flow table line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

#[derive(Serialize, Deserialize)]
struct Row {
    n: usize,
    flow: Flow,
    occurrences: u64,
    distinct_users: u64,
    user_coverage: f64,
}

pub fn write_flow_table<W: Write>(
    mut out: W,
    ranked: &[RankedFlows],
    format: TableFormat,
) -> Result<(), TableIoError> {
    let mut lists: Vec<&RankedFlows> = ranked.iter().collect();
    lists.sort_by_key(|r| r.n);
    if format == TableFormat::Tsv {
        writeln!(out, "{FLOW_TABLE_HEADER}")?;
    }
    for list in lists {
        for e in &list.entries {
            match format {
                TableFormat::Tsv => writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.6}",
                    list.n, e.flow, e.occurrences, e.distinct_users, e.user_coverage
                )?,
                TableFormat::Jsonl => {
                    // Round coverage the same way as TSV so both formats agree.
                    let row = Row {
                        n: list.n,
                        flow: e.flow.clone(),
                        occurrences: e.occurrences,
                        distinct_users: e.distinct_users,
                        user_coverage: format!("{:.6}", e.user_coverage)
                            .parse()
                            .unwrap_or(e.user_coverage),
                    };
                    serde_json::to_writer(&mut out, &row).map_err(std::io::Error::from)?;
                    writeln!(out)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn parse_tsv_row(line: &str) -> Result<Row, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let [n, flow, occ, users, coverage] = fields[..] else {
        return Err(format!(
            "expected 5 tab-separated fields, found {}",
            fields.len()
        ));
    };
    Ok(Row {
        n: n.parse().map_err(|_| format!("bad length {n:?}"))?,
        flow: Flow::parse(flow).map_err(|e| e.to_string())?,
        occurrences: occ
            .parse()
            .map_err(|_| format!("bad occurrence count {occ:?}"))?,
        distinct_users: users
            .parse()
            .map_err(|_| format!("bad user count {users:?}"))?,
        user_coverage: coverage
            .parse()
            .map_err(|_| format!("bad coverage {coverage:?}"))?,
    })
}

/// Reads a flow table in either format; the format is detected from the first line.
///
/// Lists come back ordered by `n`, each in file order.
pub fn read_flow_table<R: BufRead>(input: R) -> Result<Vec<RankedFlows>, TableIoError> {
    let mut lists: Vec<RankedFlows> = Vec::new();
    let mut format = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let line_no = i + 1;
        let malformed = |msg: String| TableIoError::Malformed { line: line_no, msg };
        let format = *format.get_or_insert(if line.starts_with('{') {
            TableFormat::Jsonl
        } else {
            TableFormat::Tsv
        });
        if line_no == 1 && format == TableFormat::Tsv {
            if line != FLOW_TABLE_HEADER {
                return Err(malformed(format!("expected header {FLOW_TABLE_HEADER:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let row = match format {
            TableFormat::Tsv => parse_tsv_row(line).map_err(malformed)?,
            TableFormat::Jsonl => {
                serde_json::from_str::<Row>(line).map_err(|e| malformed(e.to_string()))?
            }
        };
        if row.flow.len() != row.n {
            return Err(malformed(format!(
                "flow {} does not have length {}",
                row.flow, row.n
            )));
        }
        let stats = FlowStats {
            flow: row.flow,
            occurrences: row.occurrences,
            distinct_users: row.distinct_users,
            user_coverage: row.user_coverage,
        };
        match lists.iter_mut().find(|l| l.n == row.n) {
            Some(list) => list.entries.push(stats),
            None => lists.push(RankedFlows {
                n: row.n,
                entries: vec![stats],
            }),
        }
    }
    lists.sort_by_key(|l| l.n);
    Ok(lists)
}
