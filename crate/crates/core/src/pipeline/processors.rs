use std::sync::Arc;

use super::packs::{
    full_rank_list, passage_pack_name, query_span, rerank_list, EMPTY_RESULTS, QUERY_PACK,
};
use super::StageError;
use crate::answer::{answer_top_k, AnswerError, Extractor};
use crate::corpus::{PassageStore, Query, ReferenceAnswers, RelevanceJudgments};
use crate::datapack::{AnnotationRef, AttrValue, Attributes, DataPack, MultiPack};
use crate::eval::{bleu, recall_at_n, reciprocal_rank_at_n, rouge_l, token_prf};
use crate::fullranker::InvertedIndex;
use crate::reranker::{rerank, RerankConfig, Scorer};

/// One pipeline stage. Stages communicate only through the multipack.
pub trait Processor: Send + Sync {
    fn name(&self) -> &'static str;
    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError>;
}

/// Creates the query pack with a `Query` span over the whole text.
pub struct QueryReader;

impl Processor for QueryReader {
    fn name(&self) -> &'static str {
        "query"
    }

    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError> {
        let mut qp = DataPack::with_id(format!("query:{}", query.query_id), query.text.as_str());
        let len = qp.len();
        qp.add_span("Query", 0, len, Attributes::new())?;
        qp.set_meta("query_id", query.query_id.as_str());
        pack.add_pack(QUERY_PACK, qp)?;
        Ok(())
    }
}

pub struct FullRanker {
    pub index: Arc<InvertedIndex>,
    pub store: Arc<PassageStore>,
    pub top_n: usize,
}

impl Processor for FullRanker {
    fn name(&self) -> &'static str {
        "full_rank"
    }

    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError> {
        let qspan = query_span(pack)?;
        let list = self.index.search(&query.query_id, &query.text, self.top_n)?;
        if list.is_empty() {
            if let Some(qp) = pack.pack_mut(QUERY_PACK) {
                qp.set_meta(EMPTY_RESULTS, "true");
            }
        }
        for (i, e) in list.entries.iter().enumerate() {
            let text = self
                .store
                .text(&e.passage_id)
                .ok_or_else(|| StageError::MissingPassage(e.passage_id.clone()))?;
            let mut pp = DataPack::with_id(e.passage_id.as_str(), text);
            let len = pp.len();
            let mut attrs = Attributes::new();
            attrs.insert("full_rank_score".into(), AttrValue::Num(e.score));
            let span = pp.add_span("Passage", 0, len, attrs)?;
            pp.set_meta("passage_id", e.passage_id.as_str());
            pp.set_meta("full_rank_score", e.score.to_string());
            pp.set_meta("full_rank_position", (i + 1).to_string());
            let name = passage_pack_name(&e.passage_id);
            pack.add_pack(name.as_str(), pp)?;
            pack.add_cross_link(
                "Retrieved",
                AnnotationRef::in_pack(QUERY_PACK, qspan),
                AnnotationRef::in_pack(name, span),
            )?;
        }
        if let Some(qp) = pack.pack_mut(QUERY_PACK) {
            qp.set_meta("full_rank_count", list.len().to_string());
        }
        Ok(())
    }
}

pub struct ReRanker {
    pub scorer: Arc<dyn Scorer>,
    pub store: Arc<PassageStore>,
    pub config: RerankConfig,
}

impl Processor for ReRanker {
    fn name(&self) -> &'static str {
        "rerank"
    }

    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError> {
        let candidates = full_rank_list(pack)?;
        if candidates.is_empty() {
            return Ok(());
        }
        let list = rerank(&*self.scorer, &query.text, &candidates, &self.store, &self.config)?;
        for (i, e) in list.entries.iter().enumerate() {
            let pp = pack
                .pack_mut(&passage_pack_name(&e.passage_id))
                .ok_or_else(|| StageError::MissingPassage(e.passage_id.clone()))?;
            pp.set_meta("rerank_score", e.score.to_string());
            pp.set_meta("rerank_position", (i + 1).to_string());
        }
        if let Some(qp) = pack.pack_mut(QUERY_PACK) {
            qp.set_meta("rerank_count", list.len().to_string());
        }
        Ok(())
    }
}

/// Extracts an answer from the best `top_k` reranked passages and records
/// `AnswerSpan` and `AnswerSentence` spans on the chosen passage pack.
pub struct AnswerFinder {
    pub extractor: Arc<dyn Extractor>,
    pub store: Arc<PassageStore>,
    pub top_k: usize,
}

impl Processor for AnswerFinder {
    fn name(&self) -> &'static str {
        "answer"
    }

    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError> {
        let Some(list) = rerank_list(pack)? else {
            return Ok(());
        };
        let passages = list
            .entries
            .iter()
            .take(self.top_k)
            .map(|e| {
                self.store
                    .get(&e.passage_id)
                    .ok_or_else(|| StageError::MissingPassage(e.passage_id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if passages.is_empty() {
            return Ok(());
        }
        let pred = match answer_top_k(&*self.extractor, &query.query_id, &query.text, &passages) {
            Err(AnswerError::EmptyContext) => {
                log::warn!("query {}: every candidate passage is empty", query.query_id);
                return Ok(());
            }
            other => other?,
        };
        let pp = pack
            .pack_mut(&passage_pack_name(&pred.passage_id))
            .ok_or_else(|| StageError::MissingPassage(pred.passage_id.clone()))?;
        let mut attrs = Attributes::new();
        attrs.insert("confidence".into(), AttrValue::Num(pred.confidence));
        let span = pp.add_span("AnswerSpan", pred.span_begin, pred.span_end, attrs)?;
        let sentence = pp.add_span("AnswerSentence", pred.sentence_begin, pred.sentence_end, Attributes::new())?;
        pp.add_link("Encloses", sentence, span)?;
        let qp = pack.pack_mut(QUERY_PACK).ok_or(StageError::OutOfOrder("answer"))?;
        qp.set_meta("answer_passage", pred.passage_id.as_str());
        qp.set_meta("answer_confidence", pred.confidence.to_string());
        Ok(())
    }
}

/// Writes per-query metrics into the query pack metadata as
/// `eval.<stage>.<metric>` keys.
pub struct Evaluator {
    pub qrels: Option<Arc<RelevanceJudgments>>,
    pub answers: Option<Arc<ReferenceAnswers>>,
    pub n_values: Vec<usize>,
}

impl Processor for Evaluator {
    fn name(&self) -> &'static str {
        "evaluate"
    }

    fn process(&self, query: &Query, pack: &mut MultiPack) -> Result<(), StageError> {
        let mut values: Vec<(String, f64)> = Vec::new();
        if let Some(relevant) = self.qrels.as_ref().and_then(|q| q.get(&query.query_id)) {
            let fr = full_rank_list(pack)?.passage_ids();
            let rr = rerank_list(pack)?.map(|l| l.passage_ids()).unwrap_or_default();
            for (stage, ranking) in [("full_rank", &fr), ("rerank", &rr)] {
                for &n in &self.n_values {
                    values.push((format!("eval.{stage}.mrr@{n}"), reciprocal_rank_at_n(ranking, relevant, n)));
                    if let Ok(r) = recall_at_n(ranking, relevant, n) {
                        values.push((format!("eval.{stage}.recall@{n}"), r));
                    }
                }
            }
        }
        if let Some(refs) = self.answers.as_ref().and_then(|a| a.get(&query.query_id)) {
            let text = super::packs::answer(pack)?.map(|a| a.sentence_text).unwrap_or_default();
            values.push(("eval.qa.bleu4".into(), bleu(&text, refs, 4)));
            values.push(("eval.qa.rouge_l".into(), rouge_l(&text, refs)));
            values.push(("eval.qa.f1".into(), token_prf(&text, refs).f1));
        }
        let qp = pack.pack_mut(QUERY_PACK).ok_or(StageError::OutOfOrder("evaluate"))?;
        for (k, v) in values {
            qp.set_meta(k, v.to_string());
        }
        Ok(())
    }
}
