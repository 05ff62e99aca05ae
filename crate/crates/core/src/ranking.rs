//! Ranked result lists and the TREC run interchange format.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    FullRank,
    ReRank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub passage_id: String,
    pub score: f64,
}

/// Results for one query, best first. Scores are non-increasing and
/// passage ids are distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub stage: Stage,
    pub entries: Vec<RankedEntry>,
}

/// Result ordering used everywhere: score descending, then passage id
/// ascending.
pub fn result_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, stage: Stage) -> Self {
        Self { query_id: query_id.into(), stage, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn passage_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.passage_id.clone()).collect()
    }

    /// Checks the non-increasing score and distinct id invariants.
    pub fn is_well_formed(&self) -> bool {
        let sorted = self.entries.windows(2).all(|w| w[0].score >= w[1].score);
        let mut ids: Vec<&str> = self.entries.iter().map(|e| e.passage_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        sorted && ids.len() == self.entries.len()
    }

    /// Writes `qid Q0 passage_id rank score run_tag` lines, rank from 1 and
    /// scores with six decimals.
    pub fn write_trec(&self, w: &mut impl Write, run_tag: &str) -> io::Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(w, "{} Q0 {} {} {:.6} {}", self.query_id, e.passage_id, i + 1, e.score, run_tag)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("line {0}: expected `qid Q0 docid rank score tag`")]
    Malformed(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Parsed run: query id to passage ids in rank order.
pub type Run = BTreeMap<String, Vec<String>>;

/// Reads a TREC run. Lines are ordered by their rank column within each
/// query (file order breaks ties).
pub fn read_trec_run(r: impl BufRead) -> Result<Run, RunFileError> {
    let mut rows: BTreeMap<String, Vec<(u64, usize, String)>> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 6 || f[4].parse::<f64>().is_err() {
            return Err(RunFileError::Malformed(i + 1));
        }
        let rank: u64 = f[3].parse().map_err(|_| RunFileError::Malformed(i + 1))?;
        rows.entry(f[0].to_string()).or_default().push((rank, i, f[2].to_string()));
    }
    Ok(rows
        .into_iter()
        .map(|(q, mut v)| {
            v.sort();
            (q, v.into_iter().map(|(_, _, p)| p).collect())
        })
        .collect())
}
