//! Second stage: re-score the head of a full-rank list with a stronger
//! query/passage scorer.

mod lexical;
mod remote;

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

pub use lexical::LexicalScorer;
pub use remote::RemoteScorer;

use crate::corpus::PassageStore;
use crate::ranking::{result_order, RankedEntry, RankedList, Stage};
use crate::remote::RemoteError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("scorer returned {got} scores for {expected} passages")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("rerank input must be a full-rank list")]
    WrongStage,
    #[error("passage {0:?} has no text in the passage store")]
    MissingPassage(String),
    #[error("scorer failed on batch {batch_index}: {source}")]
    ScorerFailure { batch_index: usize, source: ScorerError },
    #[error("invalid rerank config: {0}")]
    InvalidConfig(&'static str),
}

/// One passage handed to a scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

/// Query/passage relevance scorer. Implementations return exactly one score
/// per input passage, position aligned, and must be shareable across
/// concurrently processed queries.
pub trait Scorer: Send + Sync {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        (**self).score_batch(query, passages)
    }
}

impl<S: Scorer + ?Sized> Scorer for std::sync::Arc<S> {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        (**self).score_batch(query, passages)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        (**self).score_batch(query, passages)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerKind {
    Lexical,
    Remote { endpoint: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RerankConfig {
    pub rerank_size: usize,
    pub batch_size: usize,
    pub scorer: ScorerKind,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self { rerank_size: 100, batch_size: 32, scorer: ScorerKind::Lexical }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<(), RerankError> {
        if self.rerank_size == 0 {
            return Err(RerankError::InvalidConfig("rerank_size must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(RerankError::InvalidConfig("batch_size must be at least 1"));
        }
        Ok(())
    }

    /// Scorer calls needed for `candidates` entries.
    pub fn expected_calls(&self, candidates: usize) -> usize {
        self.rerank_size.min(candidates).div_ceil(self.batch_size)
    }
}

/// Re-scores the first `rerank_size` candidates and sorts them by score
/// (ties by passage id). The remaining candidates follow in their original
/// order with scores `min_block − k` (k = 1, 2, ...), so scores stay
/// non-increasing. Any scorer failure aborts the whole call.
pub fn rerank<S: Scorer + ?Sized>(
    scorer: &S,
    query: &str,
    candidates: &RankedList,
    store: &PassageStore,
    config: &RerankConfig,
) -> Result<RankedList, RerankError> {
    config.validate()?;
    if candidates.stage != Stage::FullRank {
        return Err(RerankError::WrongStage);
    }
    let head_len = config.rerank_size.min(candidates.len());
    let (head, tail) = candidates.entries.split_at(head_len);

    let inputs = head
        .iter()
        .map(|e| {
            store
                .text(&e.passage_id)
                .map(|text| Candidate { id: &e.passage_id, text })
                .ok_or_else(|| RerankError::MissingPassage(e.passage_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut scores = Vec::with_capacity(head_len);
    for (batch_index, batch) in inputs.chunks(config.batch_size).enumerate() {
        let got = scorer
            .score_batch(query, batch)
            .map_err(|source| RerankError::ScorerFailure { batch_index, source })?;
        if got.len() != batch.len() {
            return Err(RerankError::ScorerFailure {
                batch_index,
                source: ScorerError::LengthMismatch { expected: batch.len(), got: got.len() },
            });
        }
        scores.extend(got);
    }

    let mut block: Vec<RankedEntry> = head
        .iter()
        .zip(scores)
        .map(|(e, score)| RankedEntry { passage_id: e.passage_id.clone(), score })
        .collect();
    block.sort_by(|a, b| result_order((&a.passage_id, a.score), (&b.passage_id, b.score)));

    let floor = block.last().map_or(0.0, |e| e.score);
    let tail = tail.iter().enumerate().map(|(k, e)| RankedEntry {
        passage_id: e.passage_id.clone(),
        score: floor - (k + 1) as f64,
    });
    block.extend(tail);

    Ok(RankedList {
        query_id: candidates.query_id.clone(),
        stage: Stage::ReRank,
        entries: block,
    })
}

/// Wraps a scorer and counts `score_batch` calls and scored passages.
#[derive(Debug, Default)]
pub struct CountingScorer<S> {
    pub inner: S,
    calls: AtomicUsize,
    passages: AtomicUsize,
}

impl<S> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, calls: AtomicUsize::new(0), passages: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn passages(&self) -> usize {
        self.passages.load(Ordering::SeqCst)
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.passages.fetch_add(passages.len(), Ordering::SeqCst);
        self.inner.score_batch(query, passages)
    }
}

/// Scores every passage with the same fixed value map, falling back to 0.
/// Handy for tests and for replaying a precomputed score table.
#[derive(Debug, Clone, Default)]
pub struct TableScorer(pub std::collections::HashMap<String, f64>);

impl Scorer for TableScorer {
    fn score_batch(&self, _query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        Ok(passages.iter().map(|c| self.0.get(c.id).copied().unwrap_or(0.0)).collect())
    }
}
