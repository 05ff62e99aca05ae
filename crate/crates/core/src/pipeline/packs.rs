//! Naming conventions for the per-query multipack and readers that turn it
//! back into ranked lists and answers.

use std::str::FromStr;

use super::StageError;
use crate::answer::AnswerPrediction;
use crate::datapack::{AnnotationId, DataPack, DataPackError, MultiPack};
use crate::ranking::{RankedEntry, RankedList, Stage};

pub const QUERY_PACK: &str = "query";
pub const PASSAGE_PREFIX: &str = "passage_";
/// Query pack metadata key set when full ranking returned nothing.
pub const EMPTY_RESULTS: &str = "empty_results";

pub fn passage_pack_name(passage_id: &str) -> String {
    format!("{PASSAGE_PREFIX}{passage_id}")
}

fn malformed(msg: String) -> StageError {
    StageError::Pack(DataPackError::MalformedPack(msg))
}

fn parse_meta<T: FromStr>(pack: &DataPack, key: &str) -> Result<Option<T>, StageError> {
    match pack.meta(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| malformed(format!("metadata {key}={v:?} is not a number"))),
    }
}

fn query_pack(mp: &MultiPack) -> Result<&DataPack, StageError> {
    mp.pack(QUERY_PACK).ok_or(StageError::OutOfOrder("query pack"))
}

pub fn query_id(mp: &MultiPack) -> Result<&str, StageError> {
    query_pack(mp)?
        .meta("query_id")
        .ok_or_else(|| malformed("query pack has no query_id".into()))
}

pub(super) fn query_span(mp: &MultiPack) -> Result<AnnotationId, StageError> {
    query_pack(mp)?
        .get_spans("Query", None)
        .first()
        .map(|s| s.id)
        .ok_or_else(|| malformed("query pack has no Query span".into()))
}

/// Passage packs in insertion (full-rank) order.
pub fn passage_packs(mp: &MultiPack) -> impl Iterator<Item = (&str, &DataPack)> {
    mp.packs()
        .filter_map(|(name, p)| name.strip_prefix(PASSAGE_PREFIX).map(|pid| (pid, p)))
}

fn collect_list(mp: &MultiPack, stage: Stage, score_key: &str, pos_key: &str) -> Result<RankedList, StageError> {
    let mut rows = Vec::new();
    for (pid, p) in passage_packs(mp) {
        let pos: Option<usize> = parse_meta(p, pos_key)?;
        let score: Option<f64> = parse_meta(p, score_key)?;
        match (pos, score) {
            (Some(pos), Some(score)) => rows.push((pos, RankedEntry { passage_id: pid.to_string(), score })),
            (None, None) => {}
            _ => return Err(malformed(format!("passage {pid} has {pos_key} or {score_key} but not both"))),
        }
    }
    rows.sort_by_key(|(pos, _)| *pos);
    let mut list = RankedList::new(query_id(mp)?, stage);
    list.entries = rows.into_iter().map(|(_, e)| e).collect();
    Ok(list)
}

/// The full-rank list recorded in the multipack (empty if nothing was
/// retrieved).
pub fn full_rank_list(mp: &MultiPack) -> Result<RankedList, StageError> {
    collect_list(mp, Stage::FullRank, "full_rank_score", "full_rank_position")
}

/// The reranked list, or `None` if the rerank stage has not produced one.
pub fn rerank_list(mp: &MultiPack) -> Result<Option<RankedList>, StageError> {
    if query_pack(mp)?.meta("rerank_count").is_none() {
        return Ok(None);
    }
    collect_list(mp, Stage::ReRank, "rerank_score", "rerank_position").map(Some)
}

/// The answer recorded by the answer stage, if any.
pub fn answer(mp: &MultiPack) -> Result<Option<AnswerPrediction>, StageError> {
    let qp = query_pack(mp)?;
    let Some(pid) = qp.meta("answer_passage") else {
        return Ok(None);
    };
    let pp = mp
        .pack(&passage_pack_name(pid))
        .ok_or_else(|| StageError::MissingPassage(pid.to_string()))?;
    let span = pp.get_spans("AnswerSpan", None).first().copied().cloned();
    let sentence = pp.get_spans("AnswerSentence", None).first().copied().cloned();
    let (Some(span), Some(sentence)) = (span, sentence) else {
        return Err(malformed(format!("passage {pid} lacks answer spans")));
    };
    let confidence = span.attributes.get("confidence").and_then(|v| v.as_f64()).unwrap_or(0.0);
    Ok(Some(AnswerPrediction {
        query_id: query_id(mp)?.to_string(),
        passage_id: pid.to_string(),
        span_begin: span.begin,
        span_end: span.end,
        span_text: pp.slice(span.begin, span.end).to_string(),
        sentence_begin: sentence.begin,
        sentence_end: sentence.end,
        sentence_text: pp.slice(sentence.begin, sentence.end).to_string(),
        confidence,
    }))
}
