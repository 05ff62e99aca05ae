use std::collections::HashSet;
use std::sync::Arc;

use super::segment::segment_sentences;
use super::{Extraction, Extractor, ExtractorError};
use crate::datapack::char_slice;
use crate::fullranker::TermStatistics;

/// Picks the sentence with the highest idf-weighted overlap with the
/// distinct query terms, divided by the square root of the sentence length
/// in terms. Ties go to the earliest sentence. The confidence is that score
/// divided by the total idf of the query terms, which keeps it in `[0, 1]`
/// and comparable across passages.
pub fn baseline_extract(query: &str, context: &str, stats: &dyn TermStatistics) -> Extraction {
    let mut query_terms: Vec<String> = stats.analyze(query);
    query_terms.sort_unstable();
    query_terms.dedup();
    let query_mass: f64 = query_terms.iter().map(|t| stats.idf(t)).sum();

    let mut best: Option<(f64, usize, usize)> = None;
    for s in segment_sentences(context) {
        let terms = stats.analyze(char_slice(context, s.start, s.end));
        let score = if terms.is_empty() {
            0.0
        } else {
            let present: HashSet<&str> = terms.iter().map(String::as_str).collect();
            let mass: f64 = query_terms
                .iter()
                .filter(|t| present.contains(t.as_str()))
                .map(|t| stats.idf(t))
                .sum();
            mass / (terms.len() as f64).sqrt()
        };
        if best.is_none_or(|(b, _, _)| score > b) {
            best = Some((score, s.start, s.end));
        }
    }
    match best {
        Some((score, begin, end)) => Extraction {
            begin,
            end,
            confidence: if query_mass > 0.0 { score / query_mass } else { 0.0 },
        },
        None => Extraction { begin: 0, end: 0, confidence: 0.0 },
    }
}

#[derive(Clone)]
pub struct BaselineExtractor {
    stats: Arc<dyn TermStatistics>,
}

impl BaselineExtractor {
    pub fn new(stats: Arc<dyn TermStatistics>) -> Self {
        Self { stats }
    }
}

impl Extractor for BaselineExtractor {
    fn extract(&self, query: &str, context: &str) -> Result<Extraction, ExtractorError> {
        Ok(baseline_extract(query, context, self.stats.as_ref()))
    }
}
