//! Ranking and QA evaluation: MRR@N, Recall@N, BLEU-1..4, ROUGE-L, token
//! precision/recall/F1 and embedding cosine similarity, plus per-query and
//! aggregate reports.

mod embedding;
mod rank;
mod report;
mod text;

use thiserror::Error;

pub use embedding::{semantic_similarity, EmbeddingTable};
pub use rank::{recall_at_n, reciprocal_rank_at_n};
pub use report::{evaluate_qa, evaluate_run, render_table, run_from_lists, EvalReport, QaPrediction};
pub use text::{bleu, lcs_len, normalize_answer, rouge_l, token_prf, TokenPrf, BLEU_EPSILON};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("recall is undefined without relevance judgments")]
    NoJudgments,
    #[error("embedding line {line}: expected {expected} dimensions, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("embedding line {line}: malformed entry")]
    MalformedEmbedding { line: usize },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
