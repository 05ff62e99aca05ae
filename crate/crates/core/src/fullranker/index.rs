use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::analysis::Analyzer;
use super::{IndexError, SearchError, TermStatistics};
use crate::corpus::Passage;
use crate::exec::Execution;
use crate::ranking::{result_order, RankedEntry, RankedList, Stage};

/// Passages tokenized per parallel work unit during a build.
const BUILD_CHUNK: usize = 2048;
/// Passages pulled from the input stream before a sharded build step.
const BUILD_BATCH: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    /// Term frequency saturation.
    pub k1: f64,
    /// Document length normalization.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IndexOptions {
    pub params: Bm25Params,
    pub analyzer: Analyzer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub ordinal: u32,
    pub tf: u32,
}

/// In-memory inverted index with the statistics Okapi BM25 needs.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(super) options: IndexOptions,
    pub(super) postings: HashMap<String, Vec<Posting>>,
    pub(super) doc_lengths: Vec<u32>,
    pub(super) avg_doc_length: f64,
    pub(super) ids: Vec<String>,
    pub(super) id_lookup: HashMap<String, u32>,
}

#[derive(Default)]
struct PartialIndex {
    postings: HashMap<String, Vec<Posting>>,
    lengths: Vec<u32>,
}

impl PartialIndex {
    fn from_texts(base: u32, texts: &[&str], analyzer: Analyzer) -> Self {
        let mut part = PartialIndex::default();
        let mut counts: HashMap<String, u32> = HashMap::new();
        for (i, text) in texts.iter().enumerate() {
            let terms = analyzer.analyze(text);
            part.lengths.push(terms.len() as u32);
            for t in terms {
                *counts.entry(t).or_insert(0) += 1;
            }
            let ordinal = base + i as u32;
            for (term, tf) in counts.drain() {
                part.postings.entry(term).or_default().push(Posting { ordinal, tf });
            }
        }
        part
    }

    /// `right` must hold strictly later ordinals than `self`.
    fn merge(mut self, right: PartialIndex) -> Self {
        for (term, list) in right.postings {
            self.postings.entry(term).or_default().extend(list);
        }
        self.lengths.extend(right.lengths);
        self
    }
}

/// Incremental builder; passages are consumed in batches and each batch is
/// tokenized in parallel shards whose postings are merged in ordinal order.
pub struct IndexBuilder {
    options: IndexOptions,
    exec: Execution,
    acc: PartialIndex,
    ids: Vec<String>,
    id_lookup: HashMap<String, u32>,
}

impl IndexBuilder {
    pub fn new(options: IndexOptions, exec: Execution) -> Self {
        Self {
            options,
            exec,
            acc: PartialIndex::default(),
            ids: Vec::new(),
            id_lookup: HashMap::new(),
        }
    }

    pub fn add_batch(&mut self, batch: &[Passage]) -> Result<(), IndexError> {
        let base = self.ids.len() as u32;
        for (i, p) in batch.iter().enumerate() {
            if self.id_lookup.insert(p.passage_id.clone(), base + i as u32).is_some() {
                // undo this batch so the builder stays consistent
                for q in &batch[..i] {
                    self.id_lookup.remove(&q.passage_id);
                }
                return Err(IndexError::DuplicatePassageId(p.passage_id.clone()));
            }
        }
        self.ids.extend(batch.iter().map(|p| p.passage_id.clone()));

        let texts: Vec<&str> = batch.iter().map(|p| p.text.as_str()).collect();
        let analyzer = self.options.analyzer;
        let part = self.exec.map_chunks_reduce(
            &texts,
            BUILD_CHUNK,
            |start, chunk| PartialIndex::from_texts(base + start as u32, chunk, analyzer),
            PartialIndex::merge,
        );
        if let Some(part) = part {
            let acc = std::mem::take(&mut self.acc);
            self.acc = acc.merge(part);
        }
        Ok(())
    }

    pub fn finish(self) -> InvertedIndex {
        InvertedIndex::from_parts(self.options, self.acc.postings, self.acc.lengths, self.ids)
    }
}

/// Builds an index from a passage stream.
pub fn build_index<I>(passages: I, options: IndexOptions, exec: Execution) -> Result<InvertedIndex, IndexError>
where
    I: IntoIterator<Item = Passage>,
{
    let mut builder = IndexBuilder::new(options, exec);
    let mut iter = passages.into_iter().peekable();
    while iter.peek().is_some() {
        let batch: Vec<Passage> = iter.by_ref().take(BUILD_BATCH).collect();
        builder.add_batch(&batch)?;
    }
    Ok(builder.finish())
}

impl InvertedIndex {
    pub(super) fn from_parts(
        options: IndexOptions,
        postings: HashMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
        ids: Vec<String>,
    ) -> Self {
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            total as f64 / doc_lengths.len() as f64
        };
        let id_lookup = ids.iter().enumerate().map(|(i, id)| (id.clone(), i as u32)).collect();
        Self { options, postings, doc_lengths, avg_doc_length, ids, id_lookup }
    }

    pub fn options(&self) -> &IndexOptions {
        &self.options
    }

    pub fn params(&self) -> Bm25Params {
        self.options.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_lengths.is_empty()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, ordinal: u32) -> Option<u32> {
        self.doc_lengths.get(ordinal as usize).copied()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn term_freq(&self, term: &str, ordinal: u32) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&ordinal, |p| p.ordinal)
            .map_or(0, |i| list[i].tf)
    }

    pub fn passage_id(&self, ordinal: u32) -> Option<&str> {
        self.ids.get(ordinal as usize).map(String::as_str)
    }

    pub fn ordinal(&self, passage_id: &str) -> Option<u32> {
        self.id_lookup.get(passage_id).copied()
    }

    /// `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
    pub fn idf_for_df(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Saturated, length-normalized contribution of one query term.
    fn term_weight(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.options.params;
        let tf = tf as f64;
        let rel_len = if self.avg_doc_length > 0.0 {
            doc_len as f64 / self.avg_doc_length
        } else {
            0.0
        };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel_len))
    }

    /// BM25 score of one passage for already-analyzed query terms. Each
    /// query term occurrence contributes, so a repeated term counts twice.
    pub fn bm25_score(&self, query_terms: &[String], ordinal: u32) -> Result<f64, SearchError> {
        if self.is_empty() {
            return Err(SearchError::EmptyIndex);
        }
        let doc_len = self.doc_length(ordinal).ok_or(SearchError::UnknownOrdinal(ordinal))?;
        let mut score = 0.0;
        for term in query_terms {
            let tf = self.term_freq(term, ordinal);
            if tf > 0 {
                score += self.term_weight(self.idf_for_df(self.doc_freq(term)), tf, doc_len);
            }
        }
        Ok(score)
    }

    /// Top `top_n` passages for `query`, ordered by score then passage id.
    /// Passages sharing no term with the query are never returned.
    pub fn search(&self, query_id: &str, query: &str, top_n: usize) -> Result<RankedList, SearchError> {
        if top_n == 0 {
            return Err(SearchError::InvalidTopN);
        }
        if self.is_empty() {
            return Err(SearchError::EmptyIndex);
        }
        let terms = self.options.analyzer.analyze(query);
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf_for_df(list.len());
            for p in list {
                let w = self.term_weight(idf, p.tf, self.doc_lengths[p.ordinal as usize]);
                *acc.entry(p.ordinal).or_insert(0.0) += w;
            }
        }

        let mut hits: Vec<(&str, f64)> = acc
            .into_iter()
            .map(|(ord, s)| (self.ids[ord as usize].as_str(), s))
            .collect();
        let cmp = |a: &(&str, f64), b: &(&str, f64)| result_order(*a, *b);
        if hits.len() > top_n {
            hits.select_nth_unstable_by(top_n - 1, cmp);
            hits.truncate(top_n);
        }
        hits.sort_unstable_by(cmp);

        Ok(RankedList {
            query_id: query_id.to_string(),
            stage: Stage::FullRank,
            entries: hits
                .into_iter()
                .map(|(id, score)| RankedEntry { passage_id: id.to_string(), score })
                .collect(),
        })
    }

    /// Runs [`search`](Self::search) for many `(query_id, text)` pairs,
    /// returning results in input order.
    pub fn search_batch(
        &self,
        queries: &[(String, String)],
        top_n: usize,
        exec: Execution,
    ) -> Vec<Result<RankedList, SearchError>> {
        exec.map(queries, |(qid, text)| self.search(qid, text, top_n))
    }
}

impl TermStatistics for InvertedIndex {
    fn analyze(&self, text: &str) -> Vec<String> {
        self.options.analyzer.analyze(text)
    }

    fn idf(&self, term: &str) -> f64 {
        self.idf_for_df(self.doc_freq(term))
    }
}
