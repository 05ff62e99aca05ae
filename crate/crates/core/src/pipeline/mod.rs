//! End-to-end pipeline: query pack creation, full ranking, reranking and
//! answer extraction as processors over a per-query [`MultiPack`].

mod batch;
mod config;
pub mod packs;
mod processors;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

pub use batch::{
    read_predictions, write_predictions, BatchInputs, BatchReport, BatchResult, QueryOutcome, SweepReport, SweepRow,
};
pub use config::{PipelineConfig, BUILTIN};
pub use processors::{AnswerFinder, Evaluator, FullRanker, Processor, QueryReader, ReRanker};

use crate::answer::{AnswerError, BaselineExtractor, Extractor, RemoteExtractor};
use crate::corpus::{
    chunk_documents, read_cord_corpus, read_passage_collection, ChunkParams, CorpusError, Document, OnMalformed,
    Passage, PassageStore, Query, ReferenceAnswers, RelevanceJudgments,
};
use crate::datapack::{DataPackError, MultiPack};
use crate::eval::EvalError;
use crate::exec::Execution;
use crate::fullranker::{build_index, load_index, save_index, IndexError, InvertedIndex, SearchError};
use crate::remote::RemoteError;
use crate::reranker::{LexicalScorer, RemoteScorer, RerankError, Scorer};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Answer(#[from] AnswerError),
    #[error(transparent)]
    Pack(#[from] DataPackError),
    #[error("passage {0} is not in the passage store")]
    MissingPassage(String),
    #[error("{0} is missing; stages ran out of order")]
    OutOfOrder(&'static str),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("endpoint {endpoint} unreachable: {source}")]
    EndpointUnreachable { endpoint: String, source: RemoteError },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("query {query_id}: {stage} failed: {source}")]
    Stage { stage: &'static str, query_id: String, source: StageError },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl PipelineError {
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config { .. })
    }
}

/// Per-stage wall time for one query, in processor order.
pub type StageTimings = Vec<(&'static str, Duration)>;

pub struct Pipeline {
    config: PipelineConfig,
    index: Arc<InvertedIndex>,
    store: Arc<PassageStore>,
    scorer: Arc<dyn Scorer>,
    extractor: Arc<dyn Extractor>,
    processors: Vec<Box<dyn Processor>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("config", &self.config)
            .field("passages", &self.store.len())
            .field("processors", &self.processor_names())
            .finish()
    }
}

impl Pipeline {
    /// Loads the corpus, loads or builds the index, and connects the
    /// configured scorer and extractor.
    pub fn build(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let exec = config.execution();
        let passages = load_passages(&config, exec)?;
        let index = match &config.index {
            Some(path) if path.exists() => {
                let index = load_index(path)?;
                check_index(&config, &index, passages.len())?;
                index
            }
            other => {
                let index = build_index(passages.iter().cloned(), config.index_options(), exec)?;
                if let Some(path) = other {
                    save_index(&index, path)?;
                }
                index
            }
        };
        let store: PassageStore = passages.into_iter().collect();
        Self::from_parts(config, Arc::new(index), Arc::new(store))
    }

    /// Assembles a pipeline around an existing index and store, creating the
    /// scorer and extractor named in the config.
    pub fn from_parts(
        config: PipelineConfig,
        index: Arc<InvertedIndex>,
        store: Arc<PassageStore>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let timeout = Duration::from_millis(config.remote_timeout_ms);
        let scorer: Arc<dyn Scorer> = if config.scorer == BUILTIN {
            Arc::new(LexicalScorer::new(index.clone()))
        } else {
            let s = RemoteScorer::new(&config.scorer, timeout, config.max_in_flight).map_err(|e| {
                PipelineError::Config { field: "scorer".into(), message: e.to_string() }
            })?;
            s.probe().map_err(|source| PipelineError::EndpointUnreachable {
                endpoint: config.scorer.clone(),
                source,
            })?;
            Arc::new(s)
        };
        let extractor: Arc<dyn Extractor> = if config.extractor == BUILTIN {
            Arc::new(BaselineExtractor::new(index.clone()))
        } else {
            let x = RemoteExtractor::new(&config.extractor, timeout, config.max_in_flight).map_err(|e| {
                PipelineError::Config { field: "extractor".into(), message: e.to_string() }
            })?;
            x.probe().map_err(|source| PipelineError::EndpointUnreachable {
                endpoint: config.extractor.clone(),
                source,
            })?;
            Arc::new(x)
        };
        Self::with_components(config, index, store, scorer, extractor)
    }

    /// Assembles a pipeline with caller-supplied scorer and extractor.
    pub fn with_components(
        config: PipelineConfig,
        index: Arc<InvertedIndex>,
        store: Arc<PassageStore>,
        scorer: Arc<dyn Scorer>,
        extractor: Arc<dyn Extractor>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        let mut p = Self { config, index, store, scorer, extractor, processors: Vec::new() };
        p.processors = p.default_processors();
        Ok(p)
    }

    fn default_processors(&self) -> Vec<Box<dyn Processor>> {
        vec![
            Box::new(QueryReader),
            Box::new(FullRanker {
                index: self.index.clone(),
                store: self.store.clone(),
                top_n: self.config.full_rank_top_n,
            }),
            Box::new(ReRanker {
                scorer: self.scorer.clone(),
                store: self.store.clone(),
                config: self.config.rerank_config(),
            }),
            Box::new(AnswerFinder {
                extractor: self.extractor.clone(),
                store: self.store.clone(),
                top_k: self.config.qa_top_k,
            }),
        ]
    }

    /// Same index, store, scorer and extractor under a different config.
    pub fn reconfigured(&self, config: PipelineConfig) -> Result<Self, PipelineError> {
        Self::with_components(
            config,
            self.index.clone(),
            self.store.clone(),
            self.scorer.clone(),
            self.extractor.clone(),
        )
    }

    /// Appends a processor that records per-query metrics in the query pack.
    pub fn with_evaluation(
        mut self,
        qrels: Option<Arc<RelevanceJudgments>>,
        answers: Option<Arc<ReferenceAnswers>>,
    ) -> Self {
        let n_values = self.config.n_values.clone();
        self.processors.push(Box::new(Evaluator { qrels, answers, n_values }));
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn index(&self) -> &Arc<InvertedIndex> {
        &self.index
    }

    pub fn store(&self) -> &Arc<PassageStore> {
        &self.store
    }

    pub fn processor_names(&self) -> Vec<&'static str> {
        self.processors.iter().map(|p| p.name()).collect()
    }

    /// Runs every processor on a fresh multipack for `query`.
    pub fn process_query(&self, query: &Query) -> Result<MultiPack, PipelineError> {
        self.process_query_timed(query).map(|(mp, _)| mp)
    }

    pub fn process_query_timed(&self, query: &Query) -> Result<(MultiPack, StageTimings), PipelineError> {
        let mut mp = MultiPack::new();
        let mut timings = Vec::with_capacity(self.processors.len());
        for p in &self.processors {
            let t = Instant::now();
            p.process(query, &mut mp).map_err(|source| PipelineError::Stage {
                stage: p.name(),
                query_id: query.query_id.clone(),
                source,
            })?;
            timings.push((p.name(), t.elapsed()));
        }
        Ok((mp, timings))
    }
}

impl PipelineConfig {
    pub fn execution(&self) -> Execution {
        if self.workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn check_index(config: &PipelineConfig, index: &InvertedIndex, passages: usize) -> Result<(), PipelineError> {
    if *index.options() != config.index_options() {
        return Err(PipelineError::Config {
            field: "index".into(),
            message: format!(
                "index was built with {:?}, config asks for {:?}",
                index.options(),
                config.index_options()
            ),
        });
    }
    if index.doc_count() != passages {
        return Err(PipelineError::Config {
            field: "index".into(),
            message: format!("index holds {} passages, collection has {passages}", index.doc_count()),
        });
    }
    Ok(())
}

/// Reads the configured collection, chunking it when `chunk_window` is set.
/// CORD documents are always chunked (with default parameters if none are
/// configured).
pub fn load_passages(config: &PipelineConfig, exec: Execution) -> Result<Vec<Passage>, PipelineError> {
    if let (Some(meta), Some(dir)) = (&config.cord_metadata, &config.cord_fulltext) {
        let mut reader = read_cord_corpus(meta, dir)?;
        let docs = reader.by_ref().collect::<Result<Vec<Document>, _>>()?;
        if reader.title_only() > 0 {
            log::warn!("{} documents had no full text and use their title only", reader.title_only());
        }
        let params = config.chunk_params().unwrap_or_default();
        return Ok(chunk_documents(&docs, params, exec)?);
    }
    let Some(path) = &config.collection else {
        return Err(PipelineError::Config {
            field: "collection".into(),
            message: "no collection or CORD corpus configured".into(),
        });
    };
    let passages = read_passage_collection(path, OnMalformed::Fail)?.collect::<Result<Vec<_>, _>>()?;
    match config.chunk_params() {
        None => Ok(passages),
        Some(params) => Ok(chunk_passages(passages, params, exec)?),
    }
}

fn chunk_passages(passages: Vec<Passage>, params: ChunkParams, exec: Execution) -> Result<Vec<Passage>, CorpusError> {
    let docs: Vec<Document> = passages
        .into_iter()
        .map(|p| Document { doc_id: p.passage_id, title: None, body: p.text })
        .collect();
    chunk_documents(&docs, params, exec)
}
