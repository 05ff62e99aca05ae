use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::embedding::{semantic_similarity, EmbeddingTable};
use super::rank::{recall_at_n, reciprocal_rank_at_n};
use super::text::{bleu, rouge_l, token_prf, BLEU_EPSILON};
use crate::corpus::{ReferenceAnswers, RelevanceJudgments};
use crate::exec::Execution;
use crate::ranking::{RankedList, Run};

pub type MetricMap = BTreeMap<String, f64>;

/// Per-query metric values and their means over the evaluated queries.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, MetricMap>,
    pub aggregate: MetricMap,
    pub evaluated: usize,
    pub skipped: usize,
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    fn from_rows(rows: Vec<(String, Option<MetricMap>)>, config: BTreeMap<String, String>) -> Self {
        let mut report = EvalReport { config, ..Default::default() };
        for (qid, row) in rows {
            match row {
                Some(m) => {
                    report.per_query.insert(qid, m);
                }
                None => report.skipped += 1,
            }
        }
        report.evaluated = report.per_query.len();
        let mut sums: MetricMap = BTreeMap::new();
        for m in report.per_query.values() {
            for (k, v) in m {
                *sums.entry(k.clone()).or_insert(0.0) += v;
            }
        }
        let n = report.evaluated as f64;
        report.aggregate = sums.into_iter().map(|(k, s)| (k, s / n)).collect();
        report
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).copied()
    }
}

/// Collects ranked lists into a run keyed by query id.
pub fn run_from_lists<'a>(lists: impl IntoIterator<Item = &'a RankedList>) -> Run {
    lists
        .into_iter()
        .map(|l| (l.query_id.clone(), l.passage_ids()))
        .collect()
}

/// Reciprocal rank and recall at every cutoff in `n_values` for each run
/// query with judgments; queries without judgments are skipped and counted.
pub fn evaluate_run(run: &Run, qrels: &RelevanceJudgments, n_values: &[usize], exec: Execution) -> EvalReport {
    let queries: Vec<(&String, &Vec<String>)> = run.iter().collect();
    let rows = exec.map(&queries, |(qid, ranking)| {
        let row = qrels.get(qid).filter(|r| !r.is_empty()).map(|relevant| {
            let mut m = MetricMap::new();
            for &n in n_values {
                m.insert(format!("mrr@{n}"), reciprocal_rank_at_n(ranking, relevant, n));
                let recall = recall_at_n(ranking, relevant, n).expect("judgments are non-empty");
                m.insert(format!("recall@{n}"), recall);
            }
            m
        });
        ((*qid).clone(), row)
    });
    let n_list: Vec<String> = n_values.iter().map(|n| n.to_string()).collect();
    EvalReport::from_rows(rows, BTreeMap::from([("n_values".to_string(), n_list.join(","))]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPrediction {
    pub query_id: String,
    pub passage_id: String,
    pub text: String,
}

/// QA metrics for each prediction with reference answers. Semantic
/// similarity is reported only when an embedding table is given, as the best
/// cosine over the references.
pub fn evaluate_qa(
    predictions: &[QaPrediction],
    answers: &ReferenceAnswers,
    table: Option<&EmbeddingTable>,
    exec: Execution,
) -> EvalReport {
    let rows = exec.map(predictions, |p| {
        let row = answers.get(&p.query_id).filter(|r| !r.is_empty()).map(|refs| {
            let mut m = MetricMap::new();
            for n in 1..=4 {
                m.insert(format!("bleu{n}"), bleu(&p.text, refs, n));
            }
            m.insert("rouge_l".into(), rouge_l(&p.text, refs));
            let prf = token_prf(&p.text, refs);
            m.insert("precision".into(), prf.precision);
            m.insert("recall".into(), prf.recall);
            m.insert("f1".into(), prf.f1);
            if let Some(t) = table {
                let sim = refs.iter().map(|r| semantic_similarity(&p.text, r, t)).fold(0.0, f64::max);
                m.insert("semantic_sim".into(), sim);
            }
            m
        });
        (p.query_id.clone(), row)
    });
    let config = BTreeMap::from([
        ("bleu_smoothing".to_string(), format!("epsilon={BLEU_EPSILON:e}")),
        ("rouge_beta".to_string(), "1".to_string()),
        ("normalization".to_string(), "lower,strip_punct,drop_articles".to_string()),
    ]);
    EvalReport::from_rows(rows, config)
}

/// Fixed-width text table with a rule under the header; columns are right
/// aligned except the first.
pub fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let mut out = line(headers);
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
