//! Three-stage passage retrieval and question answering.
//!
//! A BM25 [`fullranker`] retrieves candidates from the whole collection, a
//! [`reranker`] re-scores the head of that list, and the [`answer`] stage
//! extracts a span from the best passage and reports its full sentence.
//! Every stage annotates a [`datapack::MultiPack`] as the query moves
//! through the [`pipeline`], and [`eval`] scores runs and answers.

pub mod answer;
pub mod corpus;
pub mod datapack;
pub mod eval;
pub mod exec;
pub mod fullranker;
pub mod pipeline;
pub mod ranking;
pub mod remote;
pub mod reranker;
pub mod stub;

pub use exec::Execution;
