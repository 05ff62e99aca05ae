use std::time::Duration;

use serde::Serialize;

use super::{Candidate, Scorer, ScorerError};
use crate::remote::{JsonClient, RemoteError};

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    candidates: Vec<WireCandidate<'a>>,
}

#[derive(Serialize)]
struct WireCandidate<'a> {
    id: &'a str,
    text: &'a str,
}

/// Client for an external scoring service: one `POST {endpoint}/v1/score`
/// per batch, answered with `{"scores": [...]}` aligned to the candidates.
#[derive(Debug)]
pub struct RemoteScorer {
    client: JsonClient,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, timeout: Duration, max_in_flight: usize) -> Result<Self, RemoteError> {
        Ok(Self { client: JsonClient::new(endpoint, timeout, max_in_flight)? })
    }

    pub fn probe(&self) -> Result<(), RemoteError> {
        self.client.probe()
    }
}

impl Scorer for RemoteScorer {
    fn score_batch(&self, query: &str, passages: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        let req = ScoreRequest {
            query,
            candidates: passages.iter().map(|c| WireCandidate { id: c.id, text: c.text }).collect(),
        };
        let body = self.client.post("/v1/score", &req)?;
        let scores = body
            .get("scores")
            .and_then(|s| s.as_array())
            .ok_or_else(|| RemoteError::Protocol("missing `scores` array".into()))?;
        if scores.len() != passages.len() {
            return Err(RemoteError::Protocol(format!(
                "{} scores for {} candidates",
                scores.len(),
                passages.len()
            ))
            .into());
        }
        scores
            .iter()
            .map(|v| {
                v.as_f64()
                    .filter(|f| f.is_finite())
                    .ok_or_else(|| RemoteError::Protocol(format!("non-numeric score {v}")).into())
            })
            .collect()
    }
}
