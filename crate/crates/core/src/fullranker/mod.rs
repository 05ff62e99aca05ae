//! First-stage keyword retrieval: an in-memory inverted index scored with
//! Okapi BM25.
//!
//! ```text
//! score(D, Q) = Σ_{q ∈ Q} idf(q) · tf·(k1 + 1) / (tf + k1·(1 − b + b·|D|/avgdl))
//! idf(q)      = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! The `+1` inside the logarithm keeps idf positive even for terms that
//! occur in more than half of the collection.

mod analysis;
mod index;
mod storage;

use thiserror::Error;

pub use analysis::{tokenize, Analyzer};
pub use index::{build_index, Bm25Params, IndexBuilder, IndexOptions, InvertedIndex, Posting};
pub use storage::{load_index, read_index, save_index, write_index, FORMAT_VERSION, MAGIC};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate passage id {0:?}")]
    DuplicatePassageId(String),
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("index format version {found}, expected {expected}")]
    VersionMismatch { found: u8, expected: u8 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("index is empty")]
    EmptyIndex,
    #[error("unknown passage ordinal {0}")]
    UnknownOrdinal(u32),
    #[error("top_n must be at least 1")]
    InvalidTopN,
}

/// Collection statistics shared by the lexical re-scorer and the baseline
/// answer extractor.
pub trait TermStatistics: Send + Sync {
    fn analyze(&self, text: &str) -> Vec<String>;
    fn idf(&self, term: &str) -> f64;
}
