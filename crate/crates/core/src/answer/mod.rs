//! Third stage: pick an answer span in the top passage and report the whole
//! sentence around it.

mod baseline;
mod remote;
mod segment;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baseline::{baseline_extract, BaselineExtractor};
pub use remote::RemoteExtractor;
pub use segment::{enclosing_sentences, segment_sentences};

use crate::corpus::Passage;
use crate::datapack::char_slice;
use crate::remote::RemoteError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractorError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("extractor returned span [{begin}, {end}) for context of length {len}")]
    InvalidSpan { begin: usize, end: usize, len: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnswerError {
    #[error("context passage is empty")]
    EmptyContext,
    #[error("extractor failed: {0}")]
    ExtractorFailure(#[from] ExtractorError),
}

/// Character span chosen by an extractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extraction {
    pub begin: usize,
    pub end: usize,
    pub confidence: f64,
}

/// Picks an answer span in a context. Offsets are characters and satisfy
/// `begin <= end <= context length`.
pub trait Extractor: Send + Sync {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError>;
}

impl<E: Extractor + ?Sized> Extractor for &E {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError> {
        (**self).extract(query, context)
    }
}

impl<E: Extractor + ?Sized> Extractor for Arc<E> {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError> {
        (**self).extract(query, context)
    }
}

impl<E: Extractor + ?Sized> Extractor for Box<E> {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError> {
        (**self).extract(query, context)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerPrediction {
    pub query_id: String,
    pub passage_id: String,
    pub span_begin: usize,
    pub span_end: usize,
    pub span_text: String,
    pub sentence_begin: usize,
    pub sentence_end: usize,
    pub sentence_text: String,
    pub confidence: f64,
}

/// Runs the extractor on one passage and widens its span to the enclosing
/// sentence(s).
pub fn answer_question<E: Extractor + ?Sized>(
    extractor: &E,
    query_id: &str,
    query: &str,
    passage: &Passage,
) -> Result<AnswerPrediction, AnswerError> {
    let context = passage.text.as_str();
    if context.trim().is_empty() {
        return Err(AnswerError::EmptyContext);
    }
    let len = context.chars().count();
    let ex = extractor.extract(query, context)?;
    if ex.begin > ex.end || ex.end > len {
        return Err(ExtractorError::InvalidSpan { begin: ex.begin, end: ex.end, len }.into());
    }
    let sentences = segment_sentences(context);
    let sent = enclosing_sentences(&sentences, ex.begin, ex.end);
    Ok(AnswerPrediction {
        query_id: query_id.to_string(),
        passage_id: passage.passage_id.clone(),
        span_begin: ex.begin,
        span_end: ex.end,
        span_text: char_slice(context, ex.begin, ex.end).to_string(),
        sentence_begin: sent.start,
        sentence_end: sent.end,
        sentence_text: char_slice(context, sent.start, sent.end).to_string(),
        confidence: ex.confidence,
    })
}

/// Answers against each passage in turn and keeps the most confident
/// prediction (the earliest passage wins ties). Passages with empty text are
/// skipped; if all are empty the result is [`AnswerError::EmptyContext`].
pub fn answer_top_k<E: Extractor + ?Sized>(
    extractor: &E,
    query_id: &str,
    query: &str,
    passages: &[&Passage],
) -> Result<AnswerPrediction, AnswerError> {
    let mut best: Option<AnswerPrediction> = None;
    for p in passages {
        let pred = match answer_question(extractor, query_id, query, p) {
            Err(AnswerError::EmptyContext) => continue,
            other => other?,
        };
        if best.as_ref().is_none_or(|b| pred.confidence > b.confidence) {
            best = Some(pred);
        }
    }
    best.ok_or(AnswerError::EmptyContext)
}
