use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::packs::{answer, full_rank_list, rerank_list};
use super::{Pipeline, PipelineError};
use crate::answer::AnswerPrediction;
use crate::corpus::{Query, ReferenceAnswers, RelevanceJudgments};
use crate::eval::{evaluate_qa, evaluate_run, render_table, run_from_lists, EmbeddingTable, EvalReport, QaPrediction};
use crate::ranking::{RankedList, Stage};

/// Inputs of a batch run. Judgments, answers and embeddings are optional;
/// the matching reports are produced only when they are present.
#[derive(Clone, Copy)]
pub struct BatchInputs<'a> {
    pub queries: &'a [Query],
    pub qrels: Option<&'a RelevanceJudgments>,
    pub answers: Option<&'a ReferenceAnswers>,
    pub embeddings: Option<&'a EmbeddingTable>,
}

impl<'a> BatchInputs<'a> {
    pub fn queries(queries: &'a [Query]) -> Self {
        Self { queries, qrels: None, answers: None, embeddings: None }
    }
}

/// What the pipeline produced for one successfully processed query.
#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub query_id: String,
    pub full_rank: RankedList,
    pub rerank: RankedList,
    pub answer: Option<AnswerPrediction>,
    pub seconds: f64,
    pub stage_seconds: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub queries: usize,
    pub failed: usize,
    /// Query id to error message for every failed query.
    pub failures: BTreeMap<String, String>,
    pub full_rank_top_n: usize,
    pub rerank_size: usize,
    /// Mean per-query latency.
    pub time_per_query_s: f64,
    /// Mean per-query time spent in each stage.
    pub stage_time_s: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    pub full_rank: Option<EvalReport>,
    pub rerank: Option<EvalReport>,
    pub qa: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub report: BatchReport,
    pub outcomes: Vec<QueryOutcome>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn sanitize(text: &str) -> String {
    text.chars().map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c }).collect()
}

/// Writes `qid<TAB>passage_id<TAB>sentence<TAB>span<TAB>confidence` lines.
/// Tabs and line breaks inside texts become spaces.
pub fn write_predictions(w: &mut impl Write, predictions: &[AnswerPrediction]) -> io::Result<()> {
    for p in predictions {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            p.query_id,
            p.passage_id,
            sanitize(&p.sentence_text),
            sanitize(&p.span_text),
            p.confidence
        )?;
    }
    Ok(())
}

/// Reads the first three columns of a predictions file. Lines with fewer
/// than three fields are rejected.
pub fn read_predictions(r: impl BufRead) -> Result<Vec<QaPrediction>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| PipelineError::Io { path: "<predictions>".into(), source })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.splitn(4, '\t').collect();
        if f.len() < 3 {
            return Err(PipelineError::Eval(crate::eval::EvalError::Input(format!(
                "predictions line {}: expected at least 3 tab-separated fields",
                i + 1
            ))));
        }
        out.push(QaPrediction { query_id: f[0].into(), passage_id: f[1].into(), text: f[2].into() });
    }
    Ok(out)
}

impl Pipeline {
    /// Processes every query, writes run files, predictions and a JSON
    /// report under `out_dir` (when given) and evaluates what it can.
    /// A failing query is logged and counted; it does not stop the batch.
    pub fn run_batch(&self, inputs: BatchInputs<'_>, out_dir: Option<&Path>) -> Result<BatchResult, PipelineError> {
        let exec = self.config.execution();
        let started = Instant::now();
        let results = exec.install(self.config.workers, || {
            exec.map(inputs.queries, |q| {
                let t = Instant::now();
                let r = self.process_query_timed(q).and_then(|(mp, timings)| {
                    let outcome = QueryOutcome {
                        query_id: q.query_id.clone(),
                        full_rank: full_rank_list(&mp).map_err(|e| stage_err(q, e))?,
                        rerank: rerank_list(&mp)
                            .map_err(|e| stage_err(q, e))?
                            .unwrap_or_else(|| RankedList::new(q.query_id.as_str(), Stage::ReRank)),
                        answer: answer(&mp).map_err(|e| stage_err(q, e))?,
                        seconds: 0.0,
                        stage_seconds: timings.iter().map(|(n, d)| (*n, d.as_secs_f64())).collect(),
                    };
                    Ok(outcome)
                });
                (r, t.elapsed().as_secs_f64())
            })
        });
        let wall_time_s = started.elapsed().as_secs_f64();

        let mut outcomes = Vec::with_capacity(results.len());
        let mut failures = BTreeMap::new();
        let mut total_s = 0.0;
        for ((r, secs), q) in results.into_iter().zip(inputs.queries) {
            total_s += secs;
            match r {
                Ok(mut o) => {
                    o.seconds = secs;
                    outcomes.push(o);
                }
                Err(e) => {
                    log::warn!("{e}");
                    failures.insert(q.query_id.clone(), e.to_string());
                }
            }
        }

        let mut stage_time_s: BTreeMap<String, f64> = BTreeMap::new();
        for o in &outcomes {
            for (name, s) in &o.stage_seconds {
                *stage_time_s.entry(name.to_string()).or_insert(0.0) += s;
            }
        }
        let n_ok = outcomes.len().max(1) as f64;
        stage_time_s.values_mut().for_each(|v| *v /= n_ok);

        let n_values = &self.config.n_values;
        let full_rank = inputs
            .qrels
            .map(|qrels| evaluate_run(&run_from_lists(outcomes.iter().map(|o| &o.full_rank)), qrels, n_values, exec));
        let rerank = inputs
            .qrels
            .map(|qrels| evaluate_run(&run_from_lists(outcomes.iter().map(|o| &o.rerank)), qrels, n_values, exec));
        let qa_predictions: Vec<QaPrediction> = outcomes.iter().map(qa_prediction).collect();
        let qa = inputs.answers.map(|a| evaluate_qa(&qa_predictions, a, inputs.embeddings, exec));

        let report = BatchReport {
            queries: inputs.queries.len(),
            failed: failures.len(),
            failures,
            full_rank_top_n: self.config.full_rank_top_n,
            rerank_size: self.config.rerank_size,
            time_per_query_s: if inputs.queries.is_empty() { 0.0 } else { total_s / inputs.queries.len() as f64 },
            stage_time_s,
            wall_time_s,
            full_rank,
            rerank,
            qa,
        };
        if let Some(dir) = out_dir {
            self.write_outputs(dir, &outcomes, &report)?;
        }
        Ok(BatchResult { report, outcomes })
    }

    fn write_outputs(&self, dir: &Path, outcomes: &[QueryOutcome], report: &BatchReport) -> Result<(), PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let tag = &self.config.run_tag;
        for (file, pick) in [
            ("full_rank.run", (|o: &QueryOutcome| &o.full_rank) as fn(&QueryOutcome) -> &RankedList),
            ("rerank.run", |o: &QueryOutcome| &o.rerank),
        ] {
            let path = dir.join(file);
            let mut w = create(&path)?;
            for o in outcomes {
                pick(o).write_trec(&mut w, tag).map_err(io_err(&path))?;
            }
            w.flush().map_err(io_err(&path))?;
        }
        let path = dir.join("predictions.tsv");
        let mut w = create(&path)?;
        let preds: Vec<AnswerPrediction> = outcomes.iter().filter_map(|o| o.answer.clone()).collect();
        write_predictions(&mut w, &preds).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;

        let path = dir.join("report.json");
        let json = serde_json::to_vec_pretty(report).expect("report serializes");
        fs::write(&path, json).map_err(io_err(&path))?;
        Ok(())
    }

    /// Runs the batch once per rerank size. Each row sets both the rerank
    /// size and the full-rank depth to `R`, and writes its outputs to
    /// `out_dir/rerank_<R>`.
    pub fn sweep(
        &self,
        sizes: &[usize],
        inputs: BatchInputs<'_>,
        out_dir: Option<&Path>,
    ) -> Result<SweepReport, PipelineError> {
        let mut rows = Vec::with_capacity(sizes.len());
        for &r in sizes {
            let mut cfg = self.config.clone();
            cfg.rerank_size = r;
            cfg.full_rank_top_n = r;
            let p = self.reconfigured(cfg)?;
            let dir = out_dir.map(|d| d.join(format!("rerank_{r}")));
            let result = p.run_batch(inputs, dir.as_deref())?;
            log::info!("rerank size {r}: {:.4}s per query", result.report.time_per_query_s);
            rows.push(SweepRow { rerank_size: r, report: result.report });
        }
        let report = SweepReport { n_values: self.config.n_values.clone(), rows };
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("sweep.json");
            fs::write(&path, serde_json::to_vec_pretty(&report).expect("report serializes")).map_err(io_err(&path))?;
            let path = dir.join("sweep.txt");
            let text = format!("{}\n{}", report.ranking_table(), report.qa_table());
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        Ok(report)
    }
}

fn stage_err(q: &Query, source: super::StageError) -> PipelineError {
    PipelineError::Stage { stage: "collect", query_id: q.query_id.clone(), source }
}

/// Successful queries without an answer are scored as an empty prediction.
fn qa_prediction(o: &QueryOutcome) -> QaPrediction {
    match &o.answer {
        Some(a) => QaPrediction {
            query_id: o.query_id.clone(),
            passage_id: a.passage_id.clone(),
            text: a.sentence_text.clone(),
        },
        None => QaPrediction { query_id: o.query_id.clone(), passage_id: String::new(), text: String::new() },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rerank_size: usize,
    pub report: BatchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n_values: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl SweepReport {
    /// Rerank size, time per query, then MRR@n and Recall@n for both stages.
    pub fn ranking_table(&self) -> String {
        let mut headers = vec!["R".to_string(), "s/query".to_string()];
        let metrics: Vec<String> = self
            .n_values
            .iter()
            .flat_map(|n| [format!("mrr@{n}"), format!("recall@{n}")])
            .collect();
        for stage in ["fr", "rr"] {
            headers.extend(metrics.iter().map(|m| format!("{stage} {m}")));
        }
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.rerank_size.to_string(), format!("{:.4}", row.report.time_per_query_s)];
                for stage in [&row.report.full_rank, &row.report.rerank] {
                    cells.extend(metrics.iter().map(|m| cell(stage.as_ref().and_then(|r| r.get(m)))));
                }
                cells
            })
            .collect();
        render_table(&headers, &rows)
    }

    pub fn qa_table(&self) -> String {
        let metrics = ["bleu1", "bleu2", "bleu3", "bleu4", "rouge_l", "precision", "recall", "f1", "semantic_sim"];
        let mut headers = vec!["R".to_string()];
        headers.extend(metrics.iter().map(|m| m.to_string()));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.rerank_size.to_string()];
                cells.extend(metrics.iter().map(|m| cell(row.report.qa.as_ref().and_then(|r| r.get(m)))));
                cells
            })
            .collect();
        render_table(&headers, &rows)
    }
}
