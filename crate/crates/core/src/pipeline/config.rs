use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::ChunkParams;
use crate::fullranker::{Analyzer, Bm25Params, IndexOptions};
use crate::reranker::{RerankConfig, ScorerKind};

/// Value of `scorer` / `extractor` selecting the built-in implementation.
pub const BUILTIN: &str = "builtin";

/// Flat key/value pipeline configuration, read from TOML. Unknown keys are
/// rejected. Relative paths are resolved against the config file's
/// directory by [`PipelineConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// `pid<TAB>text` passage collection.
    pub collection: Option<PathBuf>,
    /// CORD-19 style manifest; used instead of `collection` when set.
    pub cord_metadata: Option<PathBuf>,
    pub cord_fulltext: Option<PathBuf>,
    /// Index file; loaded if it exists, otherwise built and saved here.
    pub index: Option<PathBuf>,
    /// Chunk documents into windows of this many tokens when set.
    pub chunk_window: Option<usize>,
    pub chunk_overlap: usize,
    pub full_rank_top_n: usize,
    pub rerank_size: usize,
    pub rerank_batch_size: usize,
    /// `"builtin"` or the base URL of a scoring service.
    pub scorer: String,
    /// `"builtin"` or the base URL of an extraction service.
    pub extractor: String,
    pub qa_top_k: usize,
    pub n_values: Vec<usize>,
    pub output_dir: Option<PathBuf>,
    pub run_tag: String,
    /// Worker threads for batch runs; 0 uses every core, 1 runs sequentially.
    pub workers: usize,
    pub remote_timeout_ms: u64,
    pub max_in_flight: usize,
    pub k1: f64,
    pub b: f64,
    pub stopwords: bool,
    pub stemming: bool,
    pub embeddings: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            collection: None,
            cord_metadata: None,
            cord_fulltext: None,
            index: None,
            chunk_window: None,
            chunk_overlap: 15,
            full_rank_top_n: 1000,
            rerank_size: 100,
            rerank_batch_size: 32,
            scorer: BUILTIN.into(),
            extractor: BUILTIN.into(),
            qa_top_k: 1,
            n_values: vec![10, 100],
            output_dir: None,
            run_tag: "rankqa".into(),
            workers: 0,
            remote_timeout_ms: 30_000,
            max_in_flight: 8,
            k1: 1.2,
            b: 0.75,
            stopwords: false,
            stemming: false,
            embeddings: None,
        }
    }
}

fn config_err(field: &str, message: impl Into<String>) -> PipelineError {
    PipelineError::Config { field: field.to_string(), message: message.into() }
}

fn is_endpoint(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field"))
                .unwrap_or("<config>")
                .to_string();
            PipelineError::Config { field, message: msg }
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<config>", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.collection,
            &mut self.cord_metadata,
            &mut self.cord_fulltext,
            &mut self.index,
            &mut self.output_dir,
            &mut self.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.rerank_size == 0 {
            return Err(config_err("rerank_size", "must be at least 1"));
        }
        if self.full_rank_top_n < self.rerank_size {
            return Err(config_err(
                "rerank_size",
                format!("{} exceeds full_rank_top_n {}", self.rerank_size, self.full_rank_top_n),
            ));
        }
        if let Some(w) = self.chunk_window {
            if w <= self.chunk_overlap {
                return Err(config_err("chunk_window", "must exceed chunk_overlap"));
            }
        }
        if self.rerank_batch_size == 0 {
            return Err(config_err("rerank_batch_size", "must be at least 1"));
        }
        if self.qa_top_k == 0 {
            return Err(config_err("qa_top_k", "must be at least 1"));
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(config_err("n_values", "must be a non-empty list of positive cutoffs"));
        }
        for (field, v) in [("scorer", &self.scorer), ("extractor", &self.extractor)] {
            if v != BUILTIN && !is_endpoint(v) {
                return Err(config_err(field, format!("expected \"builtin\" or an http(s) URL, got {v:?}")));
            }
        }
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(config_err("k1", "must be a non-negative number"));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(config_err("b", "must lie in [0, 1]"));
        }
        if self.max_in_flight == 0 {
            return Err(config_err("max_in_flight", "must be at least 1"));
        }
        if self.cord_metadata.is_some() != self.cord_fulltext.is_some() {
            return Err(config_err("cord_fulltext", "cord_metadata and cord_fulltext go together"));
        }
        Ok(())
    }

    pub fn index_options(&self) -> IndexOptions {
        IndexOptions {
            params: Bm25Params { k1: self.k1, b: self.b },
            analyzer: Analyzer { stopwords: self.stopwords, stemming: self.stemming },
        }
    }

    pub fn chunk_params(&self) -> Option<ChunkParams> {
        self.chunk_window.map(|window| ChunkParams { window, overlap: self.chunk_overlap })
    }

    pub fn rerank_config(&self) -> RerankConfig {
        let scorer = if self.scorer == BUILTIN {
            ScorerKind::Lexical
        } else {
            ScorerKind::Remote { endpoint: self.scorer.clone() }
        };
        RerankConfig { rerank_size: self.rerank_size, batch_size: self.rerank_batch_size, scorer }
    }
}
