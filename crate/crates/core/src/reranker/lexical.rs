use std::collections::HashSet;
use std::sync::Arc;

use super::{Candidate, Scorer, ScorerError};
use crate::fullranker::TermStatistics;

/// Deterministic built-in scorer: the idf mass of the distinct query terms
/// found in the passage, divided by the square root of the passage length
/// in terms.
#[derive(Clone)]
pub struct LexicalScorer {
    stats: Arc<dyn TermStatistics>,
}

impl LexicalScorer {
    pub fn new(stats: Arc<dyn TermStatistics>) -> Self {
        Self { stats }
    }

    pub fn score(&self, query_terms: &HashSet<String>, text: &str) -> f64 {
        let terms = self.stats.analyze(text);
        if terms.is_empty() {
            return 0.0;
        }
        let present: HashSet<&str> = terms.iter().map(String::as_str).collect();
        // sorted so the float sum does not depend on hash order
        let mut matched: Vec<&String> =
            query_terms.iter().filter(|t| present.contains(t.as_str())).collect();
        matched.sort_unstable();
        let mass: f64 = matched.into_iter().map(|t| self.stats.idf(t)).sum();
        mass / (terms.len() as f64).sqrt()
    }
}

impl Scorer for LexicalScorer {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        let q: HashSet<String> = self.stats.analyze(query).into_iter().collect();
        Ok(passages.iter().map(|c| self.score(&q, c.text)).collect())
    }
}
